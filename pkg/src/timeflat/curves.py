"""Frenet frames and torsion of curves in R^3 and in Minkowski R^{2,1}.

Minkowski coordinates are (t, x, y) with metric diag(-1, 1, 1).  For a
spacelike curve with spacelike curvature vector, T and N are spacelike and B
is the future-pointing timelike unit normal.  Torsion is read off the normal
bundle connection form, tau ds = <nabla N, B>, so in R^{2,1} the Frenet
equation reads N' = -kappa T - tau B (with <B, B> = -1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FrameUndefinedError

__all__ = [
    "ClosedCurve",
    "FrenetData",
    "CurveFlatness",
    "frenet",
    "is_time_flat_curve",
    "named_curve",
    "CURVES",
]

KAPPA_MIN = 1e-8
FD_STEP = 1e-3

METRICS = {"euclidean": np.diag([1.0, 1.0, 1.0]), "minkowski": np.diag([-1.0, 1.0, 1.0])}


@dataclass(frozen=True)
class ClosedCurve:
    """Closed-form curve t -> gamma(t) with its first three derivatives.

    ``derivs(t)`` returns an array [4, n, 3] (gamma, gamma', gamma'', gamma''').
    ``closed=False`` marks a diagnostic open arc over [0, 2 pi).
    """

    name: str
    derivs: object
    signature: str = "euclidean"
    n_samples: int = 256
    closed: bool = True

    @property
    def metric(self):
        return METRICS[self.signature]

    def params(self):
        return 2 * np.pi * np.arange(self.n_samples) / self.n_samples

    def reparametrized(self, c=0.3):
        """Same curve under t = s + c sin(s), monotone for |c| < 1."""
        if not abs(c) < 1:
            raise DomainError("reparametrization needs |c| < 1")
        base = self.derivs

        def derivs(s):
            s = np.asarray(s, dtype=float)
            p = s + c * np.sin(s)
            p1, p2, p3 = 1 + c * np.cos(s), -c * np.sin(s), -c * np.cos(s)
            g0, g1, g2, g3 = base(p)
            p1, p2, p3 = p1[:, None], p2[:, None], p3[:, None]
            return np.stack([g0, g1 * p1, g2 * p1**2 + g1 * p2, g3 * p1**3 + 3 * g2 * p1 * p2 + g1 * p3])

        return ClosedCurve(f"{self.name}~", derivs, self.signature, self.n_samples, self.closed)


@dataclass
class FrenetData:
    t: np.ndarray
    speed: np.ndarray
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    kappa: np.ndarray
    tau: np.ndarray
    tau_triple: np.ndarray
    frame_error: float
    signature: str

    @property
    def tau_variance(self):
        return float(np.var(self.tau))

    @property
    def route_gap(self):
        """max |tau(connection) - tau(triple product)|."""
        return float(np.max(np.abs(self.tau - self.tau_triple)))

    def to_csv(self, path):
        s = _arclength(self.t, self.speed)
        np.savetxt(path, np.column_stack([s, self.kappa, self.tau]), delimiter=",", header="s,kappa,tau",
                   comments="")


def _arclength(t, speed):
    dt = np.diff(t, append=t[-1] + (t[1] - t[0]))
    return np.concatenate([[0.0], np.cumsum(speed * dt)[:-1]])


def _ip(G, a, b):
    return np.einsum("ij,...i,...j->...", G, a, b)


def _lorentz_cross(G, u, v):
    """Vector w with <w, x> = det[u, v, x] for all x."""
    return np.einsum("ij,...j->...i", np.linalg.inv(G), np.cross(u, v))


def _frame(curve, t):
    """(speed, T, N, B, kappa) from closed-form derivatives at parameters t."""
    G = curve.metric
    _, d1, d2, _ = curve.derivs(t)
    q = _ip(G, d1, d1)
    if np.any(q <= 0):
        raise DomainError(f"curve {curve.name!r} is not spacelike")
    speed = np.sqrt(q)
    T = d1 / speed[:, None]
    # curvature vector = normal part of gamma'' over speed^2
    k = (d2 - _ip(G, d2, T)[:, None] * T) / q[:, None]
    k2 = _ip(G, k, k)
    bad = np.flatnonzero(k2 <= KAPPA_MIN**2)
    if bad.size:
        kind = "vanishing" if np.all(np.abs(k2[bad]) <= KAPPA_MIN**2) else "non-spacelike"
        raise FrameUndefinedError(f"{kind} curvature vector on {curve.name!r} at sample {int(bad[0])}")
    kappa = np.sqrt(k2)
    N = k / kappa[:, None]
    B = _lorentz_cross(G, T, N)
    B /= np.sqrt(np.abs(_ip(G, B, B)))[:, None]
    if curve.signature == "minkowski":
        B *= np.sign(B[:, 0])[:, None]
    return speed, T, N, B, kappa


def _derivative(curve, t, field):
    """d/dt of a sampled field: spectral for closed curves, Richardson FD otherwise."""
    if curve.closed:
        n = len(t)
        w = np.fft.rfftfreq(n, d=1.0 / n)
        F = np.fft.rfft(field, axis=0)
        if n % 2 == 0:
            F[-1] = 0
        return np.fft.irfft(1j * w[:, None] * F, n=n, axis=0)
    h = FD_STEP

    def central(step):
        return (_frame(curve, t + step)[2] - _frame(curve, t - step)[2]) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


def frenet(curve):
    """Frenet apparatus with torsion from the rotation rate of the normal frame."""
    G = curve.metric
    t = curve.params()
    speed, T, N, B, kappa = _frame(curve, t)
    dN = _derivative(curve, t, N)
    tau = _ip(G, dN, B) / speed
    # cross-check: tau = <gamma''', B> / (kappa |gamma'|^3) (the triple product in R^3)
    d3 = curve.derivs(t)[3]
    tau_triple = _ip(G, d3, B) / (kappa * speed**3)
    gram = np.einsum("ij,nai,nbj->nab", G, np.stack([T, N, B], 1), np.stack([T, N, B], 1))
    target = np.diag([1.0, 1.0, 1.0 if curve.signature == "euclidean" else -1.0])
    return FrenetData(t, speed, T, N, B, kappa, tau, tau_triple, float(np.max(np.abs(gram - target))),
                      curve.signature)


@dataclass
class CurveFlatness:
    is_time_flat: bool
    mean_tau: float
    max_deviation: float

    def as_dict(self):
        return dict(self.__dict__)


def is_time_flat_curve(curve, data=None):
    """Constant torsion test: max |tau - mean| < 1e-6 (1 + |mean|)."""
    data = frenet(curve) if data is None else data
    w = data.speed / data.speed.sum()
    mean = float(np.sum(w * data.tau))
    dev = float(np.max(np.abs(data.tau - mean)))
    return CurveFlatness(bool(dev < 1e-6 * (1 + abs(mean))), mean, dev)


# ---------------------------------------------------------------------------
# named curves
# ---------------------------------------------------------------------------


def _trig(t, coef):
    """Columns sum_k a_k cos(w t) + b_k sin(w t) with all derivatives: [4, n, 3].

    ``coef`` is a list (per component) of (a, b, w) terms.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros((4, t.size, 3))
    for c, terms in enumerate(coef):
        for a, b, w in terms:
            cs, sn = np.cos(w * t), np.sin(w * t)
            out[0, :, c] += a * cs + b * sn
            out[1, :, c] += w * (-a * sn + b * cs)
            out[2, :, c] += -(w**2) * (a * cs + b * sn)
            out[3, :, c] += w**3 * (a * sn - b * cs)
    return out


def circle(radius=1.0, n=256):
    return ClosedCurve("circle", lambda t: _trig(t, [[(radius, 0, 1)], [(0, radius, 1)], []]), "euclidean", n)


def ellipse(a=2.0, b=1.0, n=256):
    return ClosedCurve("ellipse", lambda t: _trig(t, [[(a, 0, 1)], [(0, b, 1)], []]), "euclidean", n)


def tilted_ellipse(a=2.0, b=1.0, tilt=0.7, n=256):
    """Ellipse in the plane spanned by e_x and cos(tilt) e_y + sin(tilt) e_z."""
    c, s = np.cos(tilt), np.sin(tilt)
    return ClosedCurve("tilted-ellipse", lambda t: _trig(t, [[(a, 0, 1)], [(0, b * c, 1)], [(0, b * s, 1)]]),
                       "euclidean", n)


def wobble(eps=0.2, k=3, n=256):
    """(cos t, sin t, eps sin k t)."""
    return ClosedCurve("wobble", lambda t: _trig(t, [[(1, 0, 1)], [(0, 1, 1)], [(0, eps, k)]]), "euclidean", n)


def helix(a=1.0, b=0.5, n=256):
    """(a cos t, a sin t, b t) over one period; open arc."""

    def derivs(t):
        out = _trig(t, [[(a, 0, 1)], [(0, a, 1)], []])
        out[0, :, 2] = b * np.asarray(t)
        out[1, :, 2] = b
        return out

    return ClosedCurve("helix", derivs, "euclidean", n, closed=False)


def minkowski_circle(radius=1.0, n=256):
    """Circle in the t = 0 plane of R^{2,1}."""
    return ClosedCurve("minkowski-circle", lambda t: _trig(t, [[], [(radius, 0, 1)], [(0, radius, 1)]]),
                       "minkowski", n)


def minkowski_tilted(radius=1.0, v=0.5, n=256):
    """Circle of the spacelike plane t = v x (planar, zero torsion)."""
    return ClosedCurve("minkowski-tilted", lambda t: _trig(t, [[(v * radius, 0, 1)], [(radius, 0, 1)],
                                                              [(0, radius, 1)]]), "minkowski", n)


def minkowski_wobble(eps=0.1, k=3, n=256):
    """(eps sin k s, cos s, sin s): spacelike for eps k < 1."""
    return ClosedCurve("minkowski-wobble", lambda t: _trig(t, [[(0, eps, k)], [(1, 0, 1)], [(0, 1, 1)]]),
                       "minkowski", n)


CURVES = {
    "circle": circle,
    "ellipse": ellipse,
    "tilted-ellipse": tilted_ellipse,
    "wobble": wobble,
    "helix": helix,
    "minkowski-circle": minkowski_circle,
    "minkowski-tilted": minkowski_tilted,
    "minkowski-wobble": minkowski_wobble,
}


def named_curve(name, **params):
    try:
        factory = CURVES[name]
    except KeyError:
        raise ValueError(f"unknown curve {name!r}; choose from {sorted(CURVES)}") from None
    return factory(**params)
