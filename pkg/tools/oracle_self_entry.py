"""Reference values for the static single-layer self block of one triangle.

Independent of the package quadrature: the inner integral of a linear density
times 1/R over the triangle is evaluated in closed form (polar coordinates
about the observation point, one sub-triangle per edge), and the outer
integral with adaptive ``scipy.integrate.dblquad``.  Prints the 3 x 3 block of

    S[m, n] = (1 / 4 pi) int_T int_T h_m(x) h_n(y) / |x - y|

for the unit right triangle (0,0), (1,0), (0,1).
"""
import numpy as np
from scipy.integrate import dblquad

V = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# barycentric h_n(y) = c_n + g_n . y
_M = np.linalg.inv(np.column_stack([V, np.ones(3)]))
G = _M[:2].T
C = _M[2]


def inner(x, n):
    hx = C[n] + G[n] @ x
    total = 0.0
    for a, b in ((0, 1), (1, 2), (2, 0)):
        p, q = V[a], V[b]
        t = (q - p) / np.linalg.norm(q - p)
        f = p + ((x - p) @ t) * t
        d = np.linalg.norm(x - f)
        if d < 1e-300:
            continue
        nrm = (f - x) / d
        sp, sq = (p - f) @ t, (q - f) @ t

        def prim(s):
            # log(sec + tan) written without cancellation
            return np.arcsinh(s / d), np.hypot(s, d) / d

        lp, secp = prim(sp)
        lq, secq = prim(sq)
        total += hx * d * (lq - lp) + 0.5 * d * d * ((G[n] @ nrm) * (lq - lp) + (G[n] @ t) * (secq - secp))
    return total


def entry(m, n):
    def f(x2, x1):
        x = np.array([x1, x2])
        return (C[m] + G[m] @ x) * inner(x, n)

    val, err = dblquad(f, 0.0, 1.0, 0.0, lambda x1: 1.0 - x1, epsabs=1e-14, epsrel=1e-13)
    return val / (4 * np.pi), err / (4 * np.pi)


if __name__ == "__main__":
    for m in range(3):
        print(" ".join(f"{entry(m, n)[0]:.15e}" for n in range(3)))
