"""Compare the numba and pure-numpy kernel paths.

Times each hot kernel (grid transfers and P1 element data) and a full
BPX-style sweep built from them, for both implementations, on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--json PATH]
"""
import argparse
import json
import sys
import timeit

import numpy as np

from spls import fem, kernels


def bpx_sweep(impl, f, sizes, inv_diags, dim):
    """Nested BPX evaluation (restrict down, scale, prolong up) with a given kernel namespace."""
    res = [f]
    for n in reversed(sizes[:-1]):
        res.append(impl.restrict_1d(res[-1]) if dim == 1 else impl.restrict_2d(res[-1], n))
    res.reverse()
    s = inv_diags[0] * res[0]
    for k in range(1, len(sizes)):
        n = sizes[k - 1]
        s = (impl.prolong_1d(s) if dim == 1 else impl.prolong_2d(s, n)) + inv_diags[k] * res[k]
    return s


def cases():
    rng = np.random.default_rng(0)
    out = []
    for dim, levels in ((1, 16), (2, 8)):
        h = fem.build_hierarchy(dim, 2, levels)
        sizes = [h.mesh(k).n - 1 for k in range(h.J)]
        inv = [1.0 / fem.assemble_stiffness_p1(fem.function_space(h, fem.P1_0, k)).diagonal for k in range(h.J)]
        nc = sizes[-2]
        c = rng.standard_normal(h.dofs(h.J - 2))
        f = rng.standard_normal(h.dofs())
        mesh = h.finest
        tag = f"{dim}d n={mesh.n}"
        if dim == 1:
            out.append((f"prolong_1d {tag}", lambda m, c=c: m.prolong_1d(c)))
            out.append((f"restrict_1d {tag}", lambda m, f=f: m.restrict_1d(f)))
        else:
            out.append((f"prolong_2d {tag}", lambda m, c=c, nc=nc: m.prolong_2d(c, nc)))
            out.append((f"restrict_2d {tag}", lambda m, f=f, nc=nc: m.restrict_2d(f, nc)))
            out.append((f"p1_element_data {tag}", lambda m, mesh=mesh: m.p1_element_data(mesh.coords, mesh.elems)))
        out.append((f"bpx sweep {tag}", lambda m, f=f, s=sizes, i=inv, d=dim: bpx_sweep(m, f, s, i, d)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this path")
    args = ap.parse_args(argv)
    if kernels.numba_impl is None:
        print("numba is not importable; nothing to compare", file=sys.stderr)
        return 1
    rows = []
    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases():
        fn(kernels.numba_impl)  # compile outside the timed region
        a = fn(kernels.numpy_impl)
        b = fn(kernels.numba_impl)
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
        t_np = min(timeit.repeat(lambda: fn(kernels.numpy_impl), number=3, repeat=args.repeat)) / 3
        t_nb = min(timeit.repeat(lambda: fn(kernels.numba_impl), number=3, repeat=args.repeat)) / 3
        rows.append({"kernel": name, "numpy_ms": 1e3 * t_np, "numba_ms": 1e3 * t_nb, "speedup": t_np / t_nb})
        print(f"{name:32s} {1e3 * t_np:12.3f} {1e3 * t_nb:12.3f} {t_np / t_nb:8.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
