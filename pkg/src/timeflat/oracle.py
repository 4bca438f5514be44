"""Symbolic oracle for the Hawking mass of axisymmetric graph spheres in Minkowski space.

Independent of the spectral pipeline: the mean curvature vector comes from a
sympy derivation in (theta, phi) and the area integrals from adaptive
quadrature in theta.
"""

from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.integrate import quad

__all__ = ["graph_sphere_mass"]


@lru_cache(maxsize=None)
def _integrands():
    th, ph, e = sp.symbols("theta phi epsilon", real=True)
    f = e * (3 * sp.cos(th) ** 2 - 1) / 2
    X = sp.Matrix([f, sp.sin(th) * sp.cos(ph), sp.sin(th) * sp.sin(ph), sp.cos(th)])
    eta = sp.diag(-1, 1, 1, 1)

    def ip(u, v):
        return (u.T * eta * v)[0, 0]

    Xt, Xp = X.diff(th), X.diff(ph)
    second = {(0, 0): Xt.diff(th), (0, 1): Xt.diff(ph), (1, 1): Xp.diff(ph)}
    tang = [Xt, Xp]
    h = sp.Matrix(2, 2, lambda i, j: ip(tang[i], tang[j]))
    hinv = h.inv()

    def normal(v):
        out = v
        for a in range(2):
            for b in range(2):
                out = out - hinv[a, b] * ip(v, tang[a]) * tang[b]
        return out

    H = sp.zeros(4, 1)
    for (i, j), v in second.items():
        w = hinv[i, j] if i == j else 2 * hinv[i, j]
        H += w * normal(v)
    HH = ip(H, H)
    dA = sp.sqrt(h.det())
    # axisymmetric: evaluate on the phi = 0 meridian
    return (sp.lambdify((th, e), HH.subs(ph, 0), "numpy"), sp.lambdify((th, e), dA.subs(ph, 0), "numpy"))


def graph_sphere_mass(eps):
    """m_H of t = eps P2(cos theta) over the unit sphere at t = 0."""
    HH, dA = _integrands()
    area = 2 * np.pi * quad(lambda t: dA(t, eps), 0, np.pi, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    willmore = 2 * np.pi * quad(lambda t: HH(t, eps) * dA(t, eps), 0, np.pi, epsabs=1e-13, epsrel=1e-13,
                                limit=200)[0]
    return float(np.sqrt(area / (16 * np.pi)) * (1 - willmore / (16 * np.pi)))
