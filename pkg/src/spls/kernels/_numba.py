"""Loop kernels compiled with numba; same contracts as :mod:`spls.kernels._numpy`."""
import numpy as np
from numba import njit


@njit(cache=True)
def prolong_1d(c):
    n = c.shape[0]
    f = np.empty(2 * n + 1)
    left = 0.0
    for k in range(n):
        f[2 * k] = 0.5 * (left + c[k])
        f[2 * k + 1] = c[k]
        left = c[k]
    f[2 * n] = 0.5 * (left + 0.0)
    return f


@njit(cache=True)
def restrict_1d(f):
    n = (f.shape[0] - 1) // 2
    c = np.empty(n)
    for k in range(n):
        c[k] = f[2 * k + 1] + 0.5 * (f[2 * k] + f[2 * k + 2])
    return c


@njit(cache=True)
def prolong_2d(c, nc):
    nf = 2 * nc + 1
    cg = np.zeros((nc + 2, nc + 2))
    for j in range(nc):
        for i in range(nc):
            cg[j + 1, i + 1] = c[j * nc + i]
    f = np.empty(nf * nf)
    for J in range(nf):
        jc = J // 2
        for I in range(nf):
            ic = I // 2
            if J % 2 == 1 and I % 2 == 1:
                v = cg[jc + 1, ic + 1]
            elif J % 2 == 1:
                v = 0.5 * (cg[jc + 1, ic] + cg[jc + 1, ic + 1])
            elif I % 2 == 1:
                v = 0.5 * (cg[jc, ic + 1] + cg[jc + 1, ic + 1])
            else:
                v = 0.5 * (cg[jc, ic] + cg[jc + 1, ic + 1])
            f[J * nf + I] = v
    return f


@njit(cache=True)
def restrict_2d(f, nc):
    nf = 2 * nc + 1
    c = np.empty(nc * nc)
    for j in range(nc):
        J = 2 * j + 1
        for i in range(nc):
            I = 2 * i + 1
            s = f[J * nf + I]
            s += 0.5 * (f[J * nf + I - 1] + f[J * nf + I + 1])
            s += 0.5 * (f[(J - 1) * nf + I] + f[(J + 1) * nf + I])
            s += 0.5 * (f[(J - 1) * nf + I - 1] + f[(J + 1) * nf + I + 1])
            c[j * nc + i] = s
    return c


@njit(cache=True)
def p1_element_data(coords, elems):
    ne = elems.shape[0]
    area = np.empty(ne)
    grads = np.empty((ne, 3, 2))
    kloc = np.empty((ne, 3, 3))
    for e in range(ne):
        a, b, d = elems[e, 0], elems[e, 1], elems[e, 2]
        e1x = coords[b, 0] - coords[a, 0]
        e1y = coords[b, 1] - coords[a, 1]
        e2x = coords[d, 0] - coords[a, 0]
        e2y = coords[d, 1] - coords[a, 1]
        det = e1x * e2y - e1y * e2x
        area[e] = 0.5 * abs(det)
        i00 = e2y / det
        i01 = -e2x / det
        i10 = -e1y / det
        i11 = e1x / det
        # reference gradients (-1,-1), (1,0), (0,1)
        grads[e, 0, 0] = -i00 - i10
        grads[e, 0, 1] = -i01 - i11
        grads[e, 1, 0] = i00
        grads[e, 1, 1] = i01
        grads[e, 2, 0] = i10
        grads[e, 2, 1] = i11
        for k in range(3):
            for m in range(3):
                kloc[e, k, m] = area[e] * (grads[e, k, 0] * grads[e, m, 0]
                                           + grads[e, k, 1] * grads[e, m, 1])
    return area, grads, kloc
