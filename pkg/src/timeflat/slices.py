"""
Spacelike slices (M, g, k) of the spacetime backends, and numerical checks of
the identities that relate surface data in M to the constraint equations.

Slices use coordinates x in R^3.  Each slice knows its embedding into the
spacetime chart, so energy and momentum densities come from the spacetime
Einstein tensor and the constraint equations are a genuine cross-check:

    16 pi mu = R + (tr k)^2 - |k|^2,        8 pi J = div(k - (tr k) g).

k follows k = -<II, n> with n the future unit normal.  For the FLRW slice
that gives k = +(a'/a) g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connection import connection_form
from .embedding import surface_from_positions
from .errors import DomainError
from .spacetimes import (
    FLRW,
    Minkowski,
    Schwarzschild,
    _fd4,
    christoffel_from,
    dchristoffel_from,
    riemann_from,
)
from .sphere import InducedMetric

__all__ = [
    "SliceBackend",
    "MinkowskiT0",
    "SchwarzschildSlice",
    "FLRWSlice",
    "GraphSlice",
    "make_slice",
    "SymTensorField",
    "SliceData",
    "slice_data",
    "SliceSurface",
    "IdentityReport",
    "verify_constraints",
    "dec_pointwise",
    "sample_points",
    "constraint_scalar_curvature",
    "verify_divergence_split",
    "verify_scalar_curvature_split",
    "verify_momentum_divergence",
    "verify_p_equals_alpha",
    "verify_flow_rates",
    "decomposed_scalar_curvature",
]

EYE3 = np.eye(3)


# ---------------------------------------------------------------------------
# slice backends
# ---------------------------------------------------------------------------


class SliceBackend:
    """Riemannian slice with closed-form (or finite-difference) derivatives."""

    kind = "abstract"

    def __init__(self, fd=False, h=1e-3):
        self.fd = fd
        self.h = h

    @property
    def path(self):
        return "fd" if self.fd else "closed-form"

    def check_admissible(self, x):
        return np.asarray(x, dtype=float)

    # embedding into the spacetime chart
    def embed(self, x):
        raise NotImplementedError

    def tangents(self, x):
        """d Phi / d x^i as [..., i, a]."""
        x = np.asarray(x, dtype=float)
        T = np.zeros(x.shape[:-1] + (3, 4))
        T[..., :, 1:] = EYE3
        return T

    def normal(self, x):
        """Future unit normal of the slice in the spacetime."""
        x = np.asarray(x, dtype=float)
        g4 = self.spacetime.metric(self.embed(x))
        n = np.zeros(x.shape[:-1] + (4,))
        n[..., 0] = 1 / np.sqrt(-g4[..., 0, 0])
        return n

    # intrinsic / extrinsic tensors
    def metric(self, x):
        raise NotImplementedError

    def k(self, x):
        raise NotImplementedError

    def _dmetric(self, x):
        raise NotImplementedError

    def _ddmetric(self, x):
        raise NotImplementedError

    def _dk(self, x):
        raise NotImplementedError

    def dmetric(self, x):
        x = self.check_admissible(x)
        if self.fd:
            return np.stack([_fd4(self.metric, x, c, self.h) for c in range(3)], axis=-3)
        return self._dmetric(x)

    def ddmetric(self, x):
        x = self.check_admissible(x)
        if self.fd:
            return np.stack([_fd4(self.dmetric, x, c, self.h) for c in range(3)], axis=-4)
        return self._ddmetric(x)

    def dk(self, x):
        x = self.check_admissible(x)
        if self.fd:
            return np.stack([_fd4(self.k, x, c, self.h) for c in range(3)], axis=-3)
        return self._dk(x)

    # derived geometry
    def christoffel(self, x):
        return christoffel_from(np.linalg.inv(self.metric(x)), self.dmetric(x))

    def scalar_curvature(self, x):
        g = self.metric(x)
        ginv = np.linalg.inv(g)
        dg = self.dmetric(x)
        gam = christoffel_from(ginv, dg)
        riem = riemann_from(gam, dchristoffel_from(ginv, dg, self.ddmetric(x)))
        ric = np.einsum("...abad->...bd", riem)
        return np.einsum("...bd,...bd->...", ginv, ric)

    def describe(self):
        return {"kind": self.kind, "path": self.path}


def covariant_derivative(T, dT, gam):
    """nabla_l T_ij as [..., l, i, j] for a symmetric 2-tensor."""
    return (
        dT
        - np.einsum("...mli,...mj->...lij", gam, T)
        - np.einsum("...mlj,...im->...lij", gam, T)
    )


def divergence_sym(T, dT, g, gam):
    """(div T)_j = g^li nabla_l T_ij."""
    return np.einsum("...li,...lij->...j", np.linalg.inv(g), covariant_derivative(T, dT, gam))


class MinkowskiT0(SliceBackend):
    kind = "minkowski-t0"

    def __init__(self, **kw):
        super().__init__(**kw)
        self.spacetime = Minkowski()

    def embed(self, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([np.zeros(x.shape[:-1] + (1,)), x], axis=-1)

    def metric(self, x):
        return np.broadcast_to(EYE3, np.shape(x)[:-1] + (3, 3)).copy()

    def k(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3))

    def _dmetric(self, x):
        return np.zeros(x.shape[:-1] + (3, 3, 3))

    def _ddmetric(self, x):
        return np.zeros(x.shape[:-1] + (3, 3, 3, 3))

    def _dk(self, x):
        return np.zeros(x.shape[:-1] + (3, 3, 3))


class SchwarzschildSlice(SliceBackend):
    """Static time-symmetric slice, areal-Cartesian coordinates."""

    kind = "schwarzschild"

    def __init__(self, mass=1.0, time=0.0, **kw):
        super().__init__(**kw)
        self.spacetime = Schwarzschild(mass=mass)
        self.time = float(time)

    def check_admissible(self, x):
        self.spacetime.check_admissible(self.embed(x))
        return np.asarray(x, dtype=float)

    def embed(self, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([np.full(x.shape[:-1] + (1,), self.time), x], axis=-1)

    def metric(self, x):
        return self.spacetime.metric(self.embed(x))[..., 1:, 1:]

    def k(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3))

    def _dmetric(self, x):
        return self.spacetime._dmetric(self.embed(x))[..., 1:, 1:, 1:]

    def _ddmetric(self, x):
        return self.spacetime._ddmetric(self.embed(x))[..., 1:, 1:, 1:, 1:]

    def _dk(self, x):
        return np.zeros(x.shape[:-1] + (3, 3, 3))

    def describe(self):
        return {**super().describe(), "mass": self.spacetime.mass, "time": self.time}


class FLRWSlice(SliceBackend):
    """t = const slice of spatially flat FLRW: g = a^2 delta, k = a a' delta."""

    kind = "flrw"

    def __init__(self, time=1.0, q=2.0 / 3.0, **kw):
        super().__init__(**kw)
        self.spacetime = FLRW(q=q)
        self.time = float(time)
        if self.time <= 0.1:
            raise DomainError("FLRW slice needs t > 0.1")
        self.a, self.adot, _ = self.spacetime.scale(self.time)

    def embed(self, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([np.full(x.shape[:-1] + (1,), self.time), x], axis=-1)

    def metric(self, x):
        return np.broadcast_to(self.a**2 * EYE3, np.shape(x)[:-1] + (3, 3)).copy()

    def k(self, x):
        return np.broadcast_to(self.a * self.adot * EYE3, np.shape(x)[:-1] + (3, 3)).copy()

    def _dmetric(self, x):
        return np.zeros(x.shape[:-1] + (3, 3, 3))

    def _ddmetric(self, x):
        return np.zeros(x.shape[:-1] + (3, 3, 3, 3))

    def _dk(self, x):
        return np.zeros(x.shape[:-1] + (3, 3, 3))

    def describe(self):
        return {**super().describe(), "time": self.time, "q": self.spacetime.q}


class GraphSlice(SliceBackend):
    """Graph t = f(x) = x.Q.x/2 + b.x in Minkowski space (needs |Df| < 1)."""

    kind = "graph"

    def __init__(self, Q, b=(0.0, 0.0, 0.0), **kw):
        super().__init__(**kw)
        self.Q = np.asarray(Q, dtype=float)
        self.Q = 0.5 * (self.Q + self.Q.T)
        self.b = np.asarray(b, dtype=float)
        self.spacetime = Minkowski()

    def _f(self, x):
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x) + x @ self.b

    def _df(self, x):
        return x @ self.Q + self.b

    def check_admissible(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sum(self._df(x) ** 2, axis=-1)
        if np.any(s >= 1):
            raise DomainError(f"graph slice is not spacelike: max |Df|^2 = {np.max(s):g}")
        return x

    def embed(self, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([self._f(x)[..., None], x], axis=-1)

    def tangents(self, x):
        T = super().tangents(x)
        T[..., :, 0] = self._df(np.asarray(x, dtype=float))
        return T

    def normal(self, x):
        x = np.asarray(x, dtype=float)
        df = self._df(x)
        W = np.sqrt(1 - np.sum(df**2, axis=-1))
        return np.concatenate([np.ones(x.shape[:-1] + (1,)), df], axis=-1) / W[..., None]

    def metric(self, x):
        df = self._df(np.asarray(x, dtype=float))
        return EYE3 - df[..., :, None] * df[..., None, :]

    def k(self, x):
        df = self._df(np.asarray(x, dtype=float))
        W = np.sqrt(1 - np.sum(df**2, axis=-1))
        return self.Q / W[..., None, None]

    def _dmetric(self, x):
        df = self._df(x)
        # d_l g_ij = -(Q_li f_j + f_i Q_lj)
        return -(self.Q[:, :, None] * df[..., None, None, :] + df[..., None, :, None] * self.Q[:, None, :])

    def _ddmetric(self, x):
        Q = self.Q
        dd = -(Q[:, None, :, None] * Q[None, :, None, :] + Q[None, :, :, None] * Q[:, None, None, :])
        return np.broadcast_to(dd, x.shape[:-1] + (3, 3, 3, 3)).copy()

    def _dk(self, x):
        df = self._df(x)
        W = np.sqrt(1 - np.sum(df**2, axis=-1))
        # d_l (1/W) = f_m Q_ml / W^3
        dinvW = (df @ self.Q) / W[..., None] ** 3
        return dinvW[..., :, None, None] * self.Q

    def describe(self):
        return {**super().describe(), "Q": self.Q.tolist(), "b": self.b.tolist()}


def make_slice(kind, **params):
    kind = kind.lower()
    if kind in ("minkowski", "minkowski-t0"):
        return MinkowskiT0(fd=params.get("fd", False))
    if kind == "schwarzschild":
        return SchwarzschildSlice(mass=params.get("mass", 1.0), fd=params.get("fd", False))
    if kind == "flrw":
        return FLRWSlice(time=params.get("time", 1.0), q=params.get("q", 2.0 / 3.0), fd=params.get("fd", False))
    if kind == "graph":
        return GraphSlice(params.get("Q", np.diag([0.1, -0.1, 0.0])), params.get("b", (0.0, 0.0, 0.0)),
                          fd=params.get("fd", False))
    raise ValueError(f"unknown slice kind {kind!r}")


# ---------------------------------------------------------------------------
# tensor fields on M with closed-form derivatives
# ---------------------------------------------------------------------------


class SymTensorField:
    """Symmetric 2-tensor p_ij(x) on M with its coordinate derivative d_l p_ij."""

    def __init__(self, value, deriv, label):
        self._value = value
        self._deriv = deriv
        self.label = label

    def __call__(self, x):
        return self._value(np.asarray(x, dtype=float))

    def deriv(self, x):
        return self._deriv(np.asarray(x, dtype=float))

    @classmethod
    def constant(cls, P):
        P = np.asarray(P, dtype=float)
        P = 0.5 * (P + P.T)
        return cls(lambda x: np.broadcast_to(P, x.shape[:-1] + (3, 3)).copy(),
                   lambda x: np.zeros(x.shape[:-1] + (3, 3, 3)), "constant")

    @classmethod
    def linear(cls, P0, P1):
        """p_ij = P0_ij + P1_lij x_l (symmetrized in ij)."""
        P0 = np.asarray(P0, dtype=float)
        P0 = 0.5 * (P0 + P0.T)
        P1 = np.asarray(P1, dtype=float)
        P1 = 0.5 * (P1 + np.swapaxes(P1, 1, 2))
        return cls(lambda x: P0 + np.einsum("lij,...l->...ij", P1, x),
                   lambda x: np.broadcast_to(P1, x.shape[:-1] + (3, 3, 3)).copy(), "linear")

    @classmethod
    def radial(cls, c1, c2):
        """p_ij = c1 x_i x_j / r^3 + c2 delta_ij / r."""

        def value(x):
            r = np.linalg.norm(x, axis=-1)[..., None, None]
            return c1 * x[..., :, None] * x[..., None, :] / r**3 + c2 * EYE3 / r

        def deriv(x):
            r = np.linalg.norm(x, axis=-1)
            xx = x[..., :, None] * x[..., None, :]
            dxx = EYE3[:, :, None] * x[..., None, None, :] + EYE3[:, None, :] * x[..., None, :, None]
            t1 = dxx / r[..., None, None, None] ** 3 - 3 * x[..., :, None, None] * xx[..., None, :, :] / r[
                ..., None, None, None
            ] ** 5
            t2 = -x[..., :, None, None] / r[..., None, None, None] ** 3 * EYE3
            return c1 * t1 + c2 * t2

        return cls(value, deriv, "radial")

    @classmethod
    def momentum_of(cls, sl):
        """p = (tr k) g - k for a slice, with product-rule derivatives."""

        def value(x):
            g, k = sl.metric(x), sl.k(x)
            tr = np.einsum("...ij,...ij->...", np.linalg.inv(g), k)
            return tr[..., None, None] * g - k

        def deriv(x):
            g, k, dg, dk = sl.metric(x), sl.k(x), sl.dmetric(x), sl.dk(x)
            ginv = np.linalg.inv(g)
            dginv = -np.einsum("...ap,...lpq,...qb->...lab", ginv, dg, ginv)
            tr = np.einsum("...ij,...ij->...", ginv, k)
            dtr = np.einsum("...lij,...ij->...l", dginv, k) + np.einsum("...ij,...lij->...l", ginv, dk)
            return dtr[..., :, None, None] * g[..., None, :, :] + tr[..., None, None, None] * dg - dk

        return cls(value, deriv, "momentum")


# ---------------------------------------------------------------------------
# slice data and constraints
# ---------------------------------------------------------------------------


@dataclass
class SliceData:
    g: np.ndarray
    k: np.ndarray
    R: np.ndarray
    mu: np.ndarray
    J: np.ndarray
    hamiltonian_residual: np.ndarray
    momentum_residual: np.ndarray


def slice_data(sl, x):
    """(g, k, R, mu, J) at points x plus the residuals of both constraints."""
    x = sl.check_admissible(x)
    g, k = sl.metric(x), sl.k(x)
    ginv = np.linalg.inv(g)
    R = sl.scalar_curvature(x)
    events = sl.embed(x)
    G = sl.spacetime.einstein(events)
    n = sl.normal(x)
    T = sl.tangents(x)
    mu = np.einsum("...a,...ab,...b->...", n, G, n) / (8 * np.pi)
    J = np.einsum("...ia,...ab,...b->...i", T, G, n) / (8 * np.pi)
    trk = np.einsum("...ij,...ij->...", ginv, k)
    k2 = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, k, k)
    ham = 16 * np.pi * mu - (R + trk**2 - k2)
    gam = christoffel_from(ginv, sl.dmetric(x))
    dtr = np.einsum("...lij,...ij->...l", -np.einsum("...ap,...lpq,...qb->...lab", ginv, sl.dmetric(x), ginv), k)
    dtr += np.einsum("...ij,...lij->...l", ginv, sl.dk(x))
    S = k - trk[..., None, None] * g
    dS = sl.dk(x) - dtr[..., :, None, None] * g[..., None, :, :] - trk[..., None, None, None] * sl.dmetric(x)
    mom = 8 * np.pi * J - divergence_sym(S, dS, g, gam)
    return SliceData(g, k, R, mu, J, ham, mom)


@dataclass
class IdentityReport:
    identity: str
    max_residual: float
    l2_residual: float
    threshold: float
    grid: tuple | None
    inputs: str
    path: str

    @property
    def passed(self):
        return bool(np.isfinite(self.max_residual) and self.max_residual < self.threshold)

    def as_dict(self):
        d = dict(self.__dict__)
        d["grid"] = list(self.grid) if self.grid is not None else None
        d["passed"] = self.passed
        return d


def _report(identity, res, threshold, grid, inputs, path, weights=None):
    res = np.abs(np.asarray(res, dtype=float))
    if weights is None:
        l2 = float(np.sqrt(np.mean(res**2)))
    else:
        l2 = float(np.sqrt(np.sum(weights * res**2)))
    return IdentityReport(identity, float(res.max()), l2, threshold, grid, inputs, path)


def sample_points(sl, n=50, seed=0):
    """Points in a shell 3 < |x| < 6 (outside any horizon used here), scaled for graphs."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.uniform(3.0, 6.0, size=n)
    if isinstance(sl, GraphSlice):
        r = r / 6.0 * 0.9 / max(1e-12, np.abs(np.linalg.eigvalsh(sl.Q)).max() * 6.0 + np.linalg.norm(sl.b)) * 6.0
        r = np.minimum(r, 4.0)
    return d * r[:, None]


def verify_constraints(sl, n=50, seed=0, threshold=1e-6):
    x = sample_points(sl, n, seed)
    data = slice_data(sl, x)
    return [
        _report("constraint-hamiltonian", data.hamiltonian_residual, threshold, None,
                f"{sl.kind}: {n} points", sl.path),
        _report("constraint-momentum", np.abs(data.momentum_residual).max(axis=-1), threshold, None,
                f"{sl.kind}: {n} points", sl.path),
    ]


def dec_pointwise(sl, n=50, seed=0):
    """min over samples of mu - |J|_g (should be >= 0 on DEC backends)."""
    x = sample_points(sl, n, seed)
    data = slice_data(sl, x)
    Jn = np.sqrt(np.einsum("...ij,...i,...j->...", np.linalg.inv(data.g), data.J, data.J))
    return float(np.min(data.mu - Jn))


def verify_momentum_divergence(sl, n=50, seed=0, threshold=1e-6):
    """-2 div_M p = 16 pi J with p = (tr k) g - k."""
    x = sample_points(sl, n, seed)
    data = slice_data(sl, x)
    p = SymTensorField.momentum_of(sl)
    gam = sl.christoffel(x)
    div = divergence_sym(p(x), p.deriv(x), data.g, gam)
    res = np.abs(-2 * div - 16 * np.pi * data.J).max(axis=-1)
    return _report("momentum-divergence", res, threshold, None, f"{sl.kind}: {n} points", sl.path)


# ---------------------------------------------------------------------------
# algebraic identity for the scalar curvature
# ---------------------------------------------------------------------------


def decomposed_scalar_curvature(mu, p, g, nu, e1, e2):
    """16 pi mu + |p_S|^2 - (tr p_S)^2/2 + 2|p_bar|^2 + p(nu,nu)^2/2 - p(nu,nu) tr p_S.

    (nu, e1, e2) must be g-orthonormal.
    """
    E = np.stack([e1, e2], axis=-2)
    pS = np.einsum("...ai,...ij,...bj->...ab", E, p, E)
    pbar = np.einsum("...ai,...ij,...j->...a", E, p, nu)
    pnn = np.einsum("...i,...ij,...j->...", nu, p, nu)
    trS = pS[..., 0, 0] + pS[..., 1, 1]
    return (16 * np.pi * mu + np.sum(pS**2, axis=(-1, -2)) - 0.5 * trS**2 + 2 * np.sum(pbar**2, axis=-1)
            + 0.5 * pnn**2 - pnn * trS)


def constraint_scalar_curvature(mu, p, g):
    """R from the Hamiltonian constraint with k = (tr p) g / 2 - p."""
    ginv = np.linalg.inv(g)
    trp = np.einsum("...ij,...ij->...", ginv, p)
    k = 0.5 * trp[..., None, None] * g - p
    trk = np.einsum("...ij,...ij->...", ginv, k)
    k2 = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, k, k)
    return 16 * np.pi * mu - trk**2 + k2


def _random_orthonormal(g, rng):
    """Gram-Schmidt of random vectors with respect to g."""
    vecs = []
    for _ in range(3):
        w = rng.normal(size=3)
        for e in vecs:
            w = w - (e @ g @ w) * e
        vecs.append(w / np.sqrt(w @ g @ w))
    return vecs


def verify_scalar_curvature_split(n_samples=1000, seed=0, threshold=1e-12):
    """Random metrics, frames, p and mu; compare both sides of the R identity."""
    rng = np.random.default_rng(seed)
    res = np.empty(n_samples)
    for s in range(n_samples):
        B = rng.normal(size=(3, 3))
        g = B @ B.T + 0.5 * np.eye(3)
        p = rng.normal(size=(3, 3))
        p = 0.5 * (p + p.T)
        mu = rng.normal()
        nu, e1, e2 = _random_orthonormal(g, rng)
        lhs = constraint_scalar_curvature(mu, p, g)
        rhs = decomposed_scalar_curvature(mu, p, g, nu, e1, e2)
        res[s] = abs(lhs - rhs) / (1 + abs(lhs))
    return _report("scalar-curvature-split", res, threshold, None, f"{n_samples} random (g, p, mu, frame), seed {seed}", "algebraic")


# ---------------------------------------------------------------------------
# surfaces inside a slice
# ---------------------------------------------------------------------------


class SliceSurface:
    """Sphere in a Riemannian slice: positions Y[..., 3] on a parameter grid."""

    def __init__(self, grid, sl, Y):
        self.grid, self.slice = grid, sl
        self.Y = sl.check_admissible(Y)
        self.Yi, self.Yij = grid.partials(self.Y, 1)
        self.g = sl.metric(self.Y)
        self.gamma = sl.christoffel(self.Y)
        h = np.einsum("...ab,...ia,...jb->...ij", self.g, self.Yi, self.Yi)
        self.metric = InducedMetric(grid, h)
        N = np.cross(self.Yi[:, :, 0], self.Yi[:, :, 1])
        ginv = np.linalg.inv(self.g)
        nu = np.einsum("...ab,...b->...a", ginv, N)
        nu /= np.sqrt(np.einsum("...a,...a->...", N, nu))[..., None]
        sign = np.sign(np.einsum("...ab,...a,...b->...", self.g, nu, self.Y))
        self.nu = nu * sign[..., None]
        gx = np.einsum("...abc,...ib,...jc->...ija", self.gamma, self.Yi, self.Yi)
        self.A = -np.einsum("...ab,...ija,...b->...ij", self.g, self.Yij + gx, self.nu)
        self.H = self.metric.trace(self.A)

    @classmethod
    def from_profile(cls, grid, sl, radius=1.0, eps=0.0, profile=None):
        u = grid.unit_normal
        f = 0.0 if profile is None else profile(grid)
        return cls(grid, sl, (radius * (1 + eps * np.asarray(f)))[..., None] * u if eps else radius * u)

    @property
    def velocity(self):
        """nu / H, projected onto the resolved harmonics to strip roundoff noise."""
        return self.grid.project(self.nu / self.H[..., None], self.grid.n_theta - 1)

    def moved(self, lam):
        """Positions moved by lam * nu / H (in-slice inverse mean curvature velocity)."""
        return SliceSurface(self.grid, self.slice, self.Y + lam * self.velocity)

    def pushforward(self, w):
        """Tangent vector components w^i -> coordinate vector w^i Y_i."""
        return np.einsum("...i,...ia->...a", w, self.Yi)

    def tensor_on(self, p):
        """(p_S, p_bar, p(nu, nu)) from ambient p values at the nodes."""
        pS = np.einsum("...ia,...ab,...jb->...ij", self.Yi, p, self.Yi)
        pbar = np.einsum("...ia,...ab,...b->...i", self.Yi, p, self.nu)
        pnn = np.einsum("...a,...ab,...b->...", self.nu, p, self.nu)
        return pS, pbar, pnn


def verify_divergence_split(surface, p_field, threshold=1e-6):
    """(div_M p)(nu) = (nabla_nu p)(nu,nu) + div_S(p_bar) + H p(nu,nu) - <A, p_S>."""
    Y, nu, g = surface.Y, surface.nu, surface.g
    p = p_field(Y)
    Dp = covariant_derivative(p, p_field.deriv(Y), surface.gamma)
    divp = np.einsum("...li,...lij,...j->...", np.linalg.inv(g), Dp, nu)
    nabla_nu = np.einsum("...l,...lij,...i,...j->...", nu, Dp, nu, nu)
    pS, pbar, pnn = surface.tensor_on(p)
    m = surface.metric
    rhs = nabla_nu + m.divergence(pbar) + surface.H * pnn - m.tensor_inner(surface.A, pS)
    return _report("divergence-split", divp - rhs, threshold, surface.grid.shape,
                   f"{surface.slice.kind}, p {p_field.label}", surface.slice.path, m.dA / m.area)


def verify_p_equals_alpha(surface, threshold=1e-6):
    """p_bar(X) = -k(X, nu) against the spacetime connection form of nu."""
    sl = surface.slice
    X = sl.embed(surface.Y)
    st = surface_from_positions(X, surface.grid, sl.spacetime, require_spacelike_H=False)
    T = sl.tangents(surface.Y)
    nu4 = np.einsum("...i,...ia->...a", surface.nu, T)
    form = connection_form(st, st.normal_field(nu4))
    k = sl.k(surface.Y)
    pbar = -np.einsum("...ia,...ab,...b->...i", surface.Yi, k, surface.nu)
    res = np.abs(form.alpha - pbar).max(axis=-1)
    return _report("momentum-connection", res, threshold, surface.grid.shape, f"{sl.kind} sphere", sl.path,
                   surface.metric.dA / surface.metric.area)


def _richardson(fn, h):
    d1 = (fn(h) - fn(-h)) / (2 * h)
    d2 = (fn(h / 2) - fn(-h / 2)) / h
    return (4 * d2 - d1) / 3


def verify_flow_rates(surface, p_field=None, h=1e-3, threshold=1e-5):
    """Central-difference checks of the in-slice inverse mean curvature flow formulas.

    Returns reports for the area element, total area, H^2, p(nu,nu)^2 (when
    ``p_field`` is given) and the normal variation nu_dot = -grad(1/H).
    """
    sl = surface.slice
    m = surface.metric
    grid = surface.grid
    w = m.dA / m.area
    cache = {}

    def at(lam):
        if lam not in cache:
            cache[lam] = surface if lam == 0 else surface.moved(lam)
        return cache[lam]

    tag = f"{sl.kind} sphere"
    reports = []
    d_sqrt = _richardson(lambda s: at(s).metric.sqrt_det, h)
    reports.append(_report("area-element-rate", (d_sqrt - m.sqrt_det) / m.sqrt_det, threshold, grid.shape, tag, sl.path, w))
    d_area = _richardson(lambda s: at(s).metric.area, h)
    reports.append(_report("area-rate", [(d_area - m.area) / m.area], threshold, grid.shape, tag, sl.path))

    H = surface.H
    eta = grid.project(1 / H, grid.n_theta - 1)
    R = sl.scalar_curvature(surface.Y)
    K = m.gauss_curvature
    A2 = m.tensor_inner(surface.A, surface.A)
    rhs25 = -2 * H * m.laplacian(eta) - R + 2 * K - H**2 - A2
    d_H2 = _richardson(lambda s: at(s).H ** 2, h)
    reports.append(_report("mean-curvature-rate", (d_H2 - rhs25) / np.max(np.abs(rhs25) + 1e-300), threshold, grid.shape, tag,
                           sl.path, w))

    if p_field is not None:
        p = p_field(surface.Y)
        Dp = covariant_derivative(p, p_field.deriv(surface.Y), surface.gamma)
        nu = surface.nu
        nabla_nu = np.einsum("...l,...lij,...i,...j->...", nu, Dp, nu, nu)
        _, grad_H = m.gradient(H)
        gradH = surface.pushforward(grad_H)
        pnn = np.einsum("...a,...ab,...b->...", nu, p, nu)
        p_nu_gradH = np.einsum("...a,...ab,...b->...", nu, p, gradH)
        rhs26 = 2 * pnn / H * (nabla_nu + 2 * p_nu_gradH / H)

        def pnn2(s):
            surf = at(s)
            q = p_field(surf.Y)
            return np.einsum("...a,...ab,...b->...", surf.nu, q, surf.nu) ** 2

        d_p = _richardson(pnn2, h)
        scale = max(np.max(np.abs(rhs26)), np.max(np.abs(pnn)) ** 2, 1e-300)
        reports.append(_report("normal-momentum-rate", (d_p - rhs26) / scale, threshold, grid.shape, f"{tag}, p {p_field.label}",
                               sl.path, w))

    # covariant rate of nu against -grad(1/H)
    d_nu = _richardson(lambda s: at(s).nu, h)
    d_nu = d_nu + np.einsum("...abc,...b,...c->...a", surface.gamma, surface.velocity, surface.nu)
    _, grad_eta = m.gradient(eta)
    target = -surface.pushforward(grad_eta)
    nrm = np.sqrt(np.einsum("...ab,...a,...b->...", surface.g, d_nu - target, d_nu - target))
    reports.append(_report("normal-rate", nrm * np.mean(H), threshold, grid.shape, tag, sl.path, w))
    return reports
