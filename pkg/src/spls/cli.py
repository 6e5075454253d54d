"""Command-line experiment runner.

A run reads a flat ``key = value`` config (or flags), performs a convergence
study over a range of levels and writes the table as CSV or JSON.
"""
import argparse
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace

from . import analysis, fem, fixtures
from .errors import ConfigError, SplsError
from .saddle import NO_PROJECTION, PROJECTION, PROBLEMS, TrialSpaceSpec

COLUMNS = ("h", "dofs", "m_h", "M_h", "kappa_S", "kappa_Stilde", "kappa_PA", "iters", "err_p", "rate")
COLUMN_HELP = {
    "h": "mesh size of the test space",
    "dofs": "number of test-space unknowns",
    "m_h": "discrete inf-sup constant (sqrt of smallest nonzero eigenvalue of S_h)",
    "M_h": "discrete sup-sup constant (sqrt of largest eigenvalue of S_h)",
    "kappa_S": "condition number of S_h on M_h",
    "kappa_Stilde": "condition number of the preconditioned Schur operator",
    "kappa_PA": "condition number of P_h A_h",
    "iters": "Uzawa CG iterations to reach tol",
    "err_p": "L2 error of p_h against the manufactured solution",
    "rate": "observed convergence order of err_p (empty on the first row)",
    "c_tilde": "coercivity constant of the projection R_h (projection runs only)",
}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "1d-derivative"
    levels: tuple = (3, 4, 5)
    trial: str = NO_PROJECTION
    target: str = "p1-vector"
    metric: str = "lumped"
    target_offset: int = 1
    preconditioner: str = "exact"
    solution: str = None
    tol: float = 1e-10
    maxit: int = 1000
    format: str = "csv"
    seed: int = 0

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"unknown problem {self.problem!r}")
        if self.trial not in (NO_PROJECTION, PROJECTION):
            raise ConfigError("trial", f"unknown trial kind {self.trial!r}")
        if self.metric not in ("consistent", "lumped"):
            raise ConfigError("metric", f"unknown metric {self.metric!r}")
        if self.target not in ("p1", "p1-vector", "ambient"):
            raise ConfigError("target", f"unknown target {self.target!r}")
        if self.trial == PROJECTION and self.target != "ambient":
            want = "p1" if self.problem == "1d-derivative" else "p1-vector"
            if self.target != want:
                raise ConfigError("target", f"{self.problem} needs target {want!r}")
        if self.preconditioner not in fixtures.PRECONDITIONERS:
            raise ConfigError("preconditioner", f"unknown preconditioner {self.preconditioner!r}")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError("tol", f"must be positive, got {self.tol}")
        if self.maxit < 1:
            raise ConfigError("maxit", f"must be at least 1, got {self.maxit}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format", f"unknown format {self.format!r}")
        if not self.levels or min(self.levels) < 1:
            raise ConfigError("levels", "need a non-empty range of levels >= 1")
        dim = PROBLEMS[self.problem][0]
        extra = max(self.target_offset, 0) if self.trial == PROJECTION else 0
        finest = 2 ** (max(self.levels) - 1 + extra) * 2
        if (finest - 1) ** dim > fem.DOF_CAP:
            raise ConfigError("levels", f"level {max(self.levels)} exceeds the dof cap")
        try:
            fixtures.get_solution(self.problem, self.solution)
        except KeyError as exc:
            raise ConfigError("solution", str(exc)) from exc
        return self

    @property
    def trial_spec(self):
        if self.trial == NO_PROJECTION:
            return TrialSpaceSpec(NO_PROJECTION)
        return TrialSpaceSpec(PROJECTION, self.target, self.metric, self.target_offset)


_CONVERTERS = {"levels": "levels", "target_offset": int, "tol": float, "maxit": int, "seed": int}


def parse_levels(text):
    """``"3..5"``, ``"3-5"``, ``"3,4,6"`` or ``"4"`` to a tuple of ints."""
    text = str(text).strip()
    for sep in ("..", "-"):
        if sep in text:
            lo, hi = text.split(sep, 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError("empty range")
            return tuple(range(lo, hi + 1))
    return tuple(int(t) for t in text.split(","))


def _convert(key, value):
    conv = _CONVERTERS.get(key, str)
    try:
        if conv == "levels":
            return parse_levels(value)
        return conv(value)
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {value!r}") from exc


def parse_config(text):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in known:
            raise ConfigError(key, "unknown key")
        values[key] = _convert(key, value)
    return ExperimentConfig(**values)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def study_table(result, with_c_tilde):
    cols = COLUMNS + (("c_tilde",) if with_c_tilde else ())
    return cols, [[getattr(row, c) for c in cols] for row in result.rows]


def render(result, config):
    cols, rows = study_table(result, config.trial == PROJECTION)
    if config.format == "json":
        doc = {"columns": list(cols), "rows": [dict(zip(cols, r)) for r in rows],
               "checks": [{"name": c.name, "passed": c.passed, "worst": c.worst} for c in result.checks]}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def run(config, out=None, verify=False, log=None):
    """Run the study for ``config`` and write the table; returns the exit code."""
    log = sys.stderr if log is None else log
    config.validate()
    result = analysis.convergence_study(config.problem, config.levels, config.trial_spec, config.preconditioner,
                                        config.solution, config.tol, config.maxit, verify, config.seed)
    text = render(result, config)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)
    if verify:
        failed = [c for c in result.checks if not c.passed]
        for c in result.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name} (worst {c.worst:.3e}) {c.detail}".rstrip(), file=log)
        return 1 if failed else 0
    return 0


def list_fixtures():
    lines = ["problems:"]
    lines += ["  1d-derivative: b(v, p) = (v', p) on (0,1), Q = mean-zero L2",
              "  2d-gradient: b(v, p) = (grad v, p) on the unit square, Q = grad H^1_0",
              "trial spaces:",
              "  no-projection (§4.1): M_h = C^{-1} B V_h in the ambient P0 space",
              "  projection: M_h = R_h C^{-1} B V_h in a P1 target, consistent or lumped metric",
              "preconditioners:",
              "  exact: dense Cholesky solve with A_h",
              "  jacobi: inverse diagonal of A_h",
              "  bpx (§3.3): additive multilevel sum of diagonally scaled level hats",
              "manufactured solutions:"]
    lines += [f"  {s.name} [{s.problem}]: {s.description}" for s in fixtures.SOLUTIONS]
    lines.append("shipped fixtures:")
    lines += [f"  {fx.name}: {fx.problem}, J={fx.J}, trial {fx.trial.tag}" for fx in fixtures.FIXTURES]
    return "\n".join(lines) + "\n"


def build_parser():
    cols = "\n".join(f"  {k}: {v}" for k, v in COLUMN_HELP.items())
    p = argparse.ArgumentParser(
        prog="spls", formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Saddle point least squares experiments: convergence studies and bound checks.",
        epilog=f"CSV columns:\n{cols}\n\nThe environment variable SPLS_SEED overrides the config seed.")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--verify", action="store_true", help="run the theorem checks; exit 1 on any failure")
    p.add_argument("--list", action="store_true", help="list problems, trial spaces and preconditioners")
    p.add_argument("--problem")
    p.add_argument("--levels", help="level range such as 3..5")
    p.add_argument("--trial")
    p.add_argument("--target")
    p.add_argument("--metric")
    p.add_argument("--target-offset", dest="target_offset")
    p.add_argument("--preconditioner")
    p.add_argument("--solution")
    p.add_argument("--tol")
    p.add_argument("--maxit")
    p.add_argument("--seed")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.list:
        sys.stdout.write(list_fixtures())
        return 0
    try:
        config = ExperimentConfig()
        if args.config:
            with open(args.config) as fh:
                config = parse_config(fh.read())
        overrides = {}
        for f in fields(ExperimentConfig):
            value = getattr(args, f.name, None)
            if value is not None:
                overrides[f.name] = value if f.name == "format" else _convert(f.name, value)
        if os.environ.get("SPLS_SEED"):
            overrides["seed"] = _convert("seed", os.environ["SPLS_SEED"])
        config = replace(config, **overrides)
        return run(config, args.out, args.verify)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SplsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
