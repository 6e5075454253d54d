"""Vectorised numpy versions of the hot kernels (fallback path)."""
import numpy as np


def prolong_1d(c):
    n = c.shape[0]
    f = np.empty(2 * n + 1)
    pad = np.zeros(n + 2)
    pad[1:-1] = c
    f[1::2] = c
    f[0::2] = 0.5 * (pad[:-1] + pad[1:])
    return f


def restrict_1d(f):
    n = (f.shape[0] - 1) // 2
    return f[1::2] + 0.5 * (f[0:-1:2] + f[2::2])


def prolong_2d(c, nc):
    cg = np.zeros((nc + 2, nc + 2))
    cg[1:-1, 1:-1] = c.reshape(nc, nc)
    nf = 2 * nc + 1
    f = np.empty((nf, nf))
    f[1::2, 1::2] = cg[1:-1, 1:-1]
    f[1::2, 0::2] = 0.5 * (cg[1:-1, :-1] + cg[1:-1, 1:])
    f[0::2, 1::2] = 0.5 * (cg[:-1, 1:-1] + cg[1:, 1:-1])
    f[0::2, 0::2] = 0.5 * (cg[:-1, :-1] + cg[1:, 1:])
    return f.reshape(-1)


def restrict_2d(f, nc):
    nf = 2 * nc + 1
    g = f.reshape(nf, nf)
    c = g[1::2, 1::2].copy()
    c += 0.5 * (g[1::2, 0:-1:2] + g[1::2, 2::2])
    c += 0.5 * (g[0:-1:2, 1::2] + g[2::2, 1::2])
    c += 0.5 * (g[0:-1:2, 0:-1:2] + g[2::2, 2::2])
    return c.reshape(-1)


def p1_element_data(coords, elems):
    """Areas, constant gradients (ne, 3, 2) and local stiffness matrices of P1 triangles."""
    x = coords[elems]
    e1 = x[:, 1] - x[:, 0]
    e2 = x[:, 2] - x[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * np.abs(det)
    # inverse transpose of the affine Jacobian applied to reference gradients
    inv = np.empty((x.shape[0], 2, 2))
    inv[:, 0, 0] = e2[:, 1] / det
    inv[:, 0, 1] = -e2[:, 0] / det
    inv[:, 1, 0] = -e1[:, 1] / det
    inv[:, 1, 1] = e1[:, 0] / det
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.einsum("ka,eab->ekb", ref, inv)
    kloc = area[:, None, None] * np.einsum("eka,ela->ekl", grads, grads)
    return area, grads, kloc
