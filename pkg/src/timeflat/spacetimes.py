"""
Analytic (3+1) spacetime backends.

Every backend evaluates the metric, its Christoffel symbols and its Einstein
tensor at arrays of events.  Events are arrays of shape ``(..., 4)`` holding
``(x0, x1, x2, x3)`` in the backend's chart; all outputs carry the same
leading shape.  Index conventions:

    metric        g[..., a, b]
    christoffel   Gamma[..., a, b, c]   = Gamma^a_{bc}
    einstein      G[..., a, b]

Charts
------
``cartesian-minkowski``
    (t, x, y, z), flat.
``schwarzschild-static``
    (t, x, y, z) with r = |x| the areal radius.  The spatial metric is
    delta_ij + 2m/(r - 2m) n_i n_j, i.e. the static Schwarzschild line element
    written in Cartesian form so that every embedding component is a smooth
    function on the parameter sphere.
``schwarzschild-polar``
    (t, r, theta, phi), the textbook static chart.  Used for closed-form checks
    only; surfaces are never embedded in it.
``flrw-comoving``
    (t, x, y, z), spatially flat FLRW with scale factor a(t) = t**q.

Derivatives come in two modes.  ``analytic`` uses hand-coded first and second
metric derivatives; ``fd`` builds Christoffels from fourth-order central
differences of the metric (step ``h1``) and curvature from fourth-order
differences of those Christoffels (step ``h2``).  Steps scale with
``max(1, |coordinate|)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = [
    "MetricBackend",
    "Minkowski",
    "Schwarzschild",
    "SchwarzschildPolar",
    "FLRW",
    "metric_at",
    "christoffel_at",
    "einstein_at",
    "einstein_divergence",
    "dec_sample_check",
    "make_backend",
]

SCHWARZSCHILD_MARGIN = 1e-6
FLRW_T_MIN = 0.1


def _fd4(fn, x, c, h):
    """Fourth-order central difference of ``fn`` along coordinate ``c``."""
    x = np.asarray(x, dtype=float)
    step = h * np.maximum(1.0, np.abs(x[..., c]))
    e = np.zeros(x.shape[-1])
    e[c] = 1.0

    f = [fn(x + (k * step)[..., None] * e) for k in (-2, -1, 1, 2)]
    s = step.reshape(step.shape + (1,) * (f[0].ndim - step.ndim))
    return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * s)


class MetricBackend:
    """Base class: subclasses supply the metric and its analytic derivatives."""

    chart = "abstract"
    kind = "abstract"

    def __init__(self, mode="analytic", h1=1e-4, h2=1e-3):
        if mode not in ("analytic", "fd"):
            raise ValueError(f"unknown derivative mode {mode!r}")
        self.mode = mode
        self.h1 = h1
        self.h2 = h2

    # -- to be provided by subclasses -------------------------------------
    def check_admissible(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("event coordinates must be finite")
        return x

    def _metric(self, x):
        raise NotImplementedError

    def _dmetric(self, x):
        """d_c g_ab as array [..., c, a, b]."""
        raise NotImplementedError

    def _ddmetric(self, x):
        """d_c d_d g_ab as array [..., c, d, a, b]."""
        raise NotImplementedError

    def params(self):
        return {}

    # -- public -----------------------------------------------------------
    def metric(self, x):
        return self._metric(self.check_admissible(x))

    def inverse_metric(self, x):
        return np.linalg.inv(self.metric(x))

    def christoffel(self, x):
        x = self.check_admissible(x)
        if self.mode == "fd":
            dg = np.stack([_fd4(self._metric, x, c, self.h1) for c in range(4)], axis=-3)
        else:
            dg = self._dmetric(x)
        return christoffel_from(np.linalg.inv(self._metric(x)), dg)

    def dchristoffel(self, x):
        """d_e Gamma^a_bc as array [..., e, a, b, c]."""
        x = self.check_admissible(x)
        if self.mode == "fd":
            return np.stack(
                [_fd4(self.christoffel, x, e, self.h2) for e in range(4)], axis=-4
            )
        return dchristoffel_from(np.linalg.inv(self._metric(x)), self._dmetric(x), self._ddmetric(x))

    def riemann(self, x):
        """R^a_{bcd} = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb."""
        return riemann_from(self.christoffel(x), self.dchristoffel(x))

    def ricci(self, x):
        return np.einsum("...abad->...bd", self.riemann(x))

    def einstein(self, x):
        g = self.metric(x)
        ric = self.ricci(x)
        scal = np.einsum("...ab,...ab->...", np.linalg.inv(g), ric)
        G = ric - 0.5 * scal[..., None, None] * g
        return 0.5 * (G + np.swapaxes(G, -1, -2))

    def time_direction(self, x):
        """Coordinate vector used to fix the time orientation (future = +)."""
        x = np.asarray(x, dtype=float)
        e = np.zeros(x.shape)
        e[..., 0] = 1.0
        return e


def christoffel_from(ginv, dg):
    """Gamma^a_bc = 1/2 g^ad (d_b g_dc + d_c g_db - d_d g_bc); dg[..., d, a, b] = d_d g_ab.

    Dimension agnostic, shared with the Riemannian slice code.
    """
    s = np.einsum("...bdc->...dbc", dg) + np.einsum("...cdb->...dbc", dg) - dg
    return 0.5 * np.einsum("...ad,...dbc->...abc", ginv, s)


def dchristoffel_from(ginv, dg, ddg):
    """d_e Gamma^a_bc as [..., e, a, b, c] from first and second metric derivatives."""
    # d_e g^{ad} = -g^{ap} d_e g_pq g^{qd}
    dginv = -np.einsum("...ap,...epq,...qd->...ead", ginv, dg, ginv)
    s = np.einsum("...bdc->...dbc", dg) + np.einsum("...cdb->...dbc", dg) - dg
    ds = np.einsum("...ebdc->...edbc", ddg) + np.einsum("...ecdb->...edbc", ddg) - ddg
    return 0.5 * (
        np.einsum("...ead,...dbc->...eabc", dginv, s) + np.einsum("...ad,...edbc->...eabc", ginv, ds)
    )


def riemann_from(gam, dgam):
    """R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb."""
    r = np.einsum("...cadb->...abcd", dgam) - np.einsum("...dacb->...abcd", dgam)
    r += np.einsum("...ace,...edb->...abcd", gam, gam)
    r -= np.einsum("...ade,...ecb->...abcd", gam, gam)
    return r


def _radial_derivs(x, f, f1, f2):
    """Cartesian first and second derivatives of a radial function f(r)."""
    r = np.linalg.norm(x, axis=-1)
    n = x / r[..., None]
    d1 = (f1)[..., None] * n
    eye = np.eye(3)
    d2 = (f2 - f1 / r)[..., None, None] * n[..., :, None] * n[..., None, :] + (
        f1 / r
    )[..., None, None] * eye
    return f, d1, d2


class Minkowski(MetricBackend):
    """Flat spacetime in inertial Cartesian coordinates."""

    chart = "cartesian-minkowski"
    kind = "minkowski"

    def _metric(self, x):
        return np.broadcast_to(np.diag([-1.0, 1.0, 1.0, 1.0]), x.shape[:-1] + (4, 4)).copy()

    def _dmetric(self, x):
        return np.zeros(x.shape[:-1] + (4, 4, 4))

    def _ddmetric(self, x):
        return np.zeros(x.shape[:-1] + (4, 4, 4, 4))


class Schwarzschild(MetricBackend):
    """Exterior Schwarzschild, static time and areal radius r = |x|."""

    chart = "schwarzschild-static"
    kind = "schwarzschild"

    def __init__(self, mass=1.0, **kw):
        super().__init__(**kw)
        if mass < 0:
            raise ValueError("Schwarzschild mass must be nonnegative")
        self.mass = float(mass)

    def params(self):
        return {"mass": self.mass}

    def check_admissible(self, x):
        x = super().check_admissible(x)
        r = np.linalg.norm(x[..., 1:], axis=-1)
        bound = 2 * self.mass * (1 + SCHWARZSCHILD_MARGIN)
        if np.any(r <= bound) or np.any(r == 0):
            raise DomainError(
                f"Schwarzschild chart requires r > 2m(1+{SCHWARZSCHILD_MARGIN:g}) = {bound:g}; "
                f"got min r = {np.min(r):g}"
            )
        return x

    def _pieces(self, xs):
        m = self.mass
        r = np.linalg.norm(xs, axis=-1)
        lapse2 = 1 - 2 * m / r
        v1 = 2 * m / r**2
        v2 = -4 * m / r**3
        u = r**3 - 2 * m * r**2
        u1 = 3 * r**2 - 4 * m * r
        u2 = 6 * r - 4 * m
        F = 2 * m / u
        F1 = -2 * m * u1 / u**2
        F2 = -2 * m * (u2 / u**2 - 2 * u1**2 / u**3)
        return _radial_derivs(xs, lapse2, v1, v2), _radial_derivs(xs, F, F1, F2)

    def _metric(self, x):
        xs = x[..., 1:]
        (V, _, _), (F, _, _) = self._pieces(xs)
        g = np.zeros(x.shape[:-1] + (4, 4))
        g[..., 0, 0] = -V
        g[..., 1:, 1:] = np.eye(3) + F[..., None, None] * xs[..., :, None] * xs[..., None, :]
        return g

    def _dmetric(self, x):
        xs = x[..., 1:]
        (_, dV, _), (F, dF, _) = self._pieces(xs)
        eye = np.eye(3)
        dg = np.zeros(x.shape[:-1] + (4, 4, 4))
        dg[..., 1:, 0, 0] = -dV
        xx = xs[..., :, None] * xs[..., None, :]
        spatial = dF[..., :, None, None] * xx[..., None, :, :]
        spatial = spatial + F[..., None, None, None] * (
            eye[:, :, None] * xs[..., None, None, :] + eye[:, None, :] * xs[..., None, :, None]
        )
        dg[..., 1:, 1:, 1:] = spatial
        return dg

    def _ddmetric(self, x):
        xs = x[..., 1:]
        (_, _, ddV), (F, dF, ddF) = self._pieces(xs)
        eye = np.eye(3)
        out = np.zeros(x.shape[:-1] + (4, 4, 4, 4))
        out[..., 1:, 1:, 0, 0] = -ddV
        xx = xs[..., :, None] * xs[..., None, :]
        # d_k d_l (F x_i x_j)
        t = ddF[..., :, :, None, None] * xx[..., None, None, :, :]
        # d_k F (d_l(x_i x_j)) + d_l F (d_k(x_i x_j))
        dxx = eye[:, :, None] * xs[..., None, None, :] + eye[:, None, :] * xs[..., None, :, None]
        # dxx[..., l, i, j] = delta_il x_j + delta_jl x_i
        t = t + dF[..., :, None, None, None] * dxx[..., None, :, :, :]
        t = t + dF[..., None, :, None, None] * dxx[..., :, None, :, :]
        ee = eye[:, None, :, None] * eye[None, :, None, :] + eye[:, None, None, :] * eye[None, :, :, None]
        # ee[k, l, i, j] = delta_ik delta_jl + delta_jk delta_il
        t = t + F[..., None, None, None, None] * ee
        out[..., 1:, 1:, 1:, 1:] = t
        return out


class SchwarzschildPolar(MetricBackend):
    """Schwarzschild in the textbook (t, r, theta, phi) chart."""

    chart = "schwarzschild-polar"
    kind = "schwarzschild-polar"

    def __init__(self, mass=1.0, **kw):
        super().__init__(**kw)
        self.mass = float(mass)

    def params(self):
        return {"mass": self.mass}

    def check_admissible(self, x):
        x = super().check_admissible(x)
        bound = 2 * self.mass * (1 + SCHWARZSCHILD_MARGIN)
        if np.any(x[..., 1] <= bound):
            raise DomainError(
                f"Schwarzschild chart requires r > 2m(1+{SCHWARZSCHILD_MARGIN:g}) = {bound:g}; "
                f"got min r = {np.min(x[..., 1]):g}"
            )
        return x

    def _metric(self, x):
        m = self.mass
        r, th = x[..., 1], x[..., 2]
        V = 1 - 2 * m / r
        g = np.zeros(x.shape[:-1] + (4, 4))
        g[..., 0, 0] = -V
        g[..., 1, 1] = 1 / V
        g[..., 2, 2] = r**2
        g[..., 3, 3] = (r * np.sin(th)) ** 2
        return g

    def _dmetric(self, x):
        m = self.mass
        r, th = x[..., 1], x[..., 2]
        V = 1 - 2 * m / r
        V1 = 2 * m / r**2
        dg = np.zeros(x.shape[:-1] + (4, 4, 4))
        dg[..., 1, 0, 0] = -V1
        dg[..., 1, 1, 1] = -V1 / V**2
        dg[..., 1, 2, 2] = 2 * r
        dg[..., 1, 3, 3] = 2 * r * np.sin(th) ** 2
        dg[..., 2, 3, 3] = r**2 * np.sin(2 * th)
        return dg

    def _ddmetric(self, x):
        m = self.mass
        r, th = x[..., 1], x[..., 2]
        V = 1 - 2 * m / r
        V1 = 2 * m / r**2
        V2 = -4 * m / r**3
        d = np.zeros(x.shape[:-1] + (4, 4, 4, 4))
        d[..., 1, 1, 0, 0] = -V2
        d[..., 1, 1, 1, 1] = -(V2 * V - 2 * V1**2) / V**3
        d[..., 1, 1, 2, 2] = 2.0
        d[..., 1, 1, 3, 3] = 2 * np.sin(th) ** 2
        d[..., 1, 2, 3, 3] = d[..., 2, 1, 3, 3] = 2 * r * np.sin(2 * th)
        d[..., 2, 2, 3, 3] = 2 * r**2 * np.cos(2 * th)
        return d


class FLRW(MetricBackend):
    """Spatially flat FLRW, a(t) = t**q, comoving Cartesian coordinates."""

    chart = "flrw-comoving"
    kind = "flrw"

    def __init__(self, q=2.0 / 3.0, **kw):
        super().__init__(**kw)
        self.q = float(q)

    def params(self):
        return {"q": self.q}

    def check_admissible(self, x):
        x = super().check_admissible(x)
        if np.any(x[..., 0] <= FLRW_T_MIN):
            raise DomainError(f"FLRW chart requires t > {FLRW_T_MIN}; got min t = {np.min(x[..., 0]):g}")
        return x

    def scale(self, t):
        q = self.q
        return t**q, q * t ** (q - 1), q * (q - 1) * t ** (q - 2)

    def hubble(self, t):
        a, a1, _ = self.scale(t)
        return a1 / a

    def _metric(self, x):
        a, _, _ = self.scale(x[..., 0])
        g = np.zeros(x.shape[:-1] + (4, 4))
        g[..., 0, 0] = -1.0
        for i in range(1, 4):
            g[..., i, i] = a**2
        return g

    def _dmetric(self, x):
        a, a1, _ = self.scale(x[..., 0])
        dg = np.zeros(x.shape[:-1] + (4, 4, 4))
        for i in range(1, 4):
            dg[..., 0, i, i] = 2 * a * a1
        return dg

    def _ddmetric(self, x):
        a, a1, a2 = self.scale(x[..., 0])
        d = np.zeros(x.shape[:-1] + (4, 4, 4, 4))
        for i in range(1, 4):
            d[..., 0, 0, i, i] = 2 * (a1**2 + a * a2)
        return d


def make_backend(kind, mode="analytic", **params):
    """Build a backend from a kind string (as used in scenario files)."""
    kind = kind.lower()
    if kind == "minkowski":
        return Minkowski(mode=mode)
    if kind == "schwarzschild":
        return Schwarzschild(mass=params.get("mass", 1.0), mode=mode)
    if kind == "schwarzschild-polar":
        return SchwarzschildPolar(mass=params.get("mass", 1.0), mode=mode)
    if kind == "flrw":
        return FLRW(q=params.get("q", 2.0 / 3.0), mode=mode)
    raise ValueError(f"unknown backend kind {kind!r}")


def metric_at(backend, x):
    return backend.metric(x)


def christoffel_at(backend, x):
    return backend.christoffel(x)


def einstein_at(backend, x):
    return backend.einstein(x)


def einstein_divergence(backend, x, h=None):
    """Covariant divergence nabla_a G^a_b, with d_a by fourth-order differences."""
    x = backend.check_admissible(x)
    h = backend.h2 if h is None else h

    def mixed(y):
        return np.einsum("...ac,...cb->...ab", backend.inverse_metric(y), backend.einstein(y))

    Gm = mixed(x)
    dG = np.stack([_fd4(mixed, x, a, h) for a in range(4)], axis=-3)  # [..., c, a, b]
    gam = backend.christoffel(x)
    div = np.einsum("...aab->...b", dG)
    div += np.einsum("...aae,...eb->...b", gam, Gm)
    div -= np.einsum("...eab,...ae->...b", gam, Gm)
    return div


def _orthonormal_tetrad(g, time_dir):
    """Gram-Schmidt on (time_dir, e1, e2, e3) with respect to g (single event)."""
    basis = [time_dir] + [np.eye(4)[i] for i in range(1, 4)]
    out = []
    for v in basis:
        w = v.astype(float).copy()
        for e in out:
            ee = e @ g @ e
            w = w - (e @ g @ w) / ee * e
        out.append(w / np.sqrt(abs(w @ g @ w)))
    return np.array(out)


def dec_sample_check(backend, x, n_samples=200, rng=None, tolerance=1e-9, max_speed=0.95):
    """Sample T(u, v) = G(u, v)/8pi over random future-timelike unit u, v.

    Returns ``(ok, worst)`` where ``worst`` is the minimum sampled value and
    ``ok`` is ``worst >= -tolerance``.
    """
    rng = np.random.default_rng(rng)
    x = backend.check_admissible(np.asarray(x, dtype=float))
    g = backend.metric(x)
    G = backend.einstein(x)
    tetrad = _orthonormal_tetrad(g, backend.time_direction(x))

    def sample(k):
        d = rng.normal(size=(k, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        speed = max_speed * rng.random(k) ** (1 / 3)
        vel = d * speed[:, None]
        gamma = 1 / np.sqrt(1 - speed**2)
        return gamma[:, None] * (tetrad[0] + vel @ tetrad[1:])

    u = sample(n_samples)
    v = sample(n_samples)
    vals = np.einsum("ka,ab,kb->k", u, G, v) / (8 * np.pi)
    worst = float(vals.min())
    return worst >= -tolerance, worst
