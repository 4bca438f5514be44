"""
Spacelike 2-spheres embedded in a spacetime backend.

A surface is known through its node positions X(theta, phi) in the backend
chart.  From them we build the tangent frame, the induced metric, a
future-timelike / outward-spacelike orthonormal normal frame (n, v), the
vector-valued second fundamental form and the mean curvature vector.

Normal vectors are handled either as ambient 4-vectors or as frame
components ``(a, b)`` meaning ``a*n + b*v``.  In components the perp map is
the swap ``(a, b) -> (b, a)``.

Sign conventions: for a normal field nu the scalar form is
II_nu = -<II, nu>, so that tr II_nu = -<H, nu>; nu_H = -H/|H|.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import eval_legendre

from .errors import ConfigurationError, GeometryError, SpacelikeMeanCurvatureError
from .sphere import InducedMetric, fields_to_csv, real_harmonic

__all__ = [
    "EPS_H",
    "EmbeddingSpec",
    "EmbeddedSurface",
    "NormalField",
    "evaluate_surface",
    "surface_from_positions",
    "parse_profile",
    "perp",
]

EPS_H = 1e-8
FAMILIES = ("round", "graph", "radial", "flrw-comoving")

_TERM = re.compile(r"^\s*(?:([-+]?[0-9.eE+-]+)\s*\*)?\s*(Y(\d)(-?\d)|P(\d+)|cos|one)\s*$")


def parse_profile(text):
    """Parse a shape profile such as ``"Y22"``, ``"P2"`` or ``"0.5*Y20+0.1*Y3-1"``.

    Returns a callable ``f(grid) -> field``.  Recognized atoms: ``Ylm``
    (orthonormal real harmonic, single-digit l and m, m may be negative),
    ``Pl`` (Legendre polynomial of cos theta), ``cos`` (cos theta), ``one``.
    """
    if callable(text):
        return text
    terms = []
    for raw in re.split(r"(?<![eE*])\+", text.replace(" ", "")):
        if not raw:
            continue
        m = _TERM.match(raw)
        if m is None:
            raise ConfigurationError(f"cannot parse profile term {raw!r}")
        coef = float(m.group(1)) if m.group(1) else 1.0
        if m.group(3) is not None:
            l, mm = int(m.group(3)), int(m.group(4))
            if abs(mm) > l:
                raise ConfigurationError(f"harmonic order |m| > l in {raw!r}")
            terms.append((coef, ("Y", l, mm)))
        elif m.group(5) is not None:
            terms.append((coef, ("P", int(m.group(5)))))
        elif m.group(2) == "cos":
            terms.append((coef, ("P", 1)))
        else:
            terms.append((coef, ("P", 0)))
    if not terms:
        raise ConfigurationError(f"empty profile {text!r}")

    def profile(grid):
        out = np.zeros(grid.shape)
        th, _ = grid.mesh
        for coef, atom in terms:
            if atom[0] == "Y":
                out += coef * real_harmonic(grid, atom[1], atom[2])
            else:
                out += coef * eval_legendre(atom[1], np.cos(th))
        return out

    profile.text = text
    return profile


@dataclass(frozen=True)
class EmbeddingSpec:
    """Closed-form parametric sphere.

    round / flrw-comoving   X = (t, R u)
    graph                   X = (t + eps f, R u)
    radial                  X = (t, R (1 + eps f) u)

    with u the unit-sphere position and f the parsed ``profile``.
    """

    family: str = "round"
    radius: float = 1.0
    time: float = 0.0
    amplitude: float = 0.0
    profile: str = "Y20"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown embedding family {self.family!r}; expected one of {FAMILIES}")
        if not self.radius > 0:
            raise ConfigurationError("embedding radius must be positive")

    def positions(self, grid):
        u = grid.unit_normal
        f = parse_profile(self.profile)(grid) if self.family in ("graph", "radial") else 0.0
        X = np.empty(grid.shape + (4,))
        X[..., 0] = self.time
        if self.family == "graph":
            X[..., 0] += self.amplitude * f
        scale = self.radius * (1 + self.amplitude * f) if self.family == "radial" else self.radius
        X[..., 1:] = np.asarray(scale)[..., None] * u if np.ndim(scale) else scale * u
        return X

    def analytic_partials(self, grid):
        """Closed-form first and second partials; only the unperturbed sphere has them."""
        if not (self.family in ("round", "flrw-comoving") or self.amplitude == 0):
            return None
        th, ph = grid.mesh
        R = self.radius
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        z = np.zeros_like(th)
        Xt = np.stack([z, R * ct * cp, R * ct * sp, -R * st], -1)
        Xp = np.stack([z, -R * st * sp, R * st * cp, z], -1)
        Xtt = np.stack([z, -R * st * cp, -R * st * sp, -R * ct], -1)
        Xtp = np.stack([z, -R * ct * sp, R * ct * cp, z], -1)
        Xpp = np.stack([z, -R * st * cp, -R * st * sp, z], -1)
        first = np.stack([Xt, Xp], axis=2)
        second = np.stack([np.stack([Xtt, Xtp], 2), np.stack([Xtp, Xpp], 2)], 2)
        return first, second

    def describe(self):
        return {"family": self.family, "radius": self.radius, "time": self.time,
                "amplitude": self.amplitude, "profile": self.profile}


@dataclass(eq=False)
class NormalField:
    """Normal vector field with components ``(a, b)`` in the surface frame (n, v)."""

    surface: "EmbeddedSurface"
    a: np.ndarray
    b: np.ndarray

    @property
    def vector(self):
        s = self.surface
        return self.a[..., None] * s.n + self.b[..., None] * s.v

    @property
    def perp(self):
        return NormalField(self.surface, self.b, self.a)

    @property
    def norm2(self):
        return self.b**2 - self.a**2

    def boosted(self, angle):
        """cosh(angle) nu + sinh(angle) nu_perp."""
        c, s = np.cosh(angle), np.sinh(angle)
        return NormalField(self.surface, c * self.a + s * self.b, c * self.b + s * self.a)

    def check_unit_outward(self, tol=1e-8):
        if np.max(np.abs(self.norm2 - 1)) > tol or np.any(self.b <= 0):
            raise GeometryError("normal field is not unit outward-spacelike")
        return self

    @property
    def angle(self):
        """Boost angle psi with nu = sinh(psi) n + cosh(psi) v (unit outward fields)."""
        return np.arctanh(self.a / self.b)


def perp(a, b):
    """(a n + b v)^perp = b n + a v, in frame components."""
    return b, a


def _ambient_inner(g, u, w):
    return np.einsum("...ab,...a,...b->...", g, u, w)


@dataclass(eq=False)
class EmbeddedSurface:
    """Discrete spacelike sphere with its extrinsic data.  Treat as immutable."""

    grid: object
    backend: object
    X: np.ndarray
    Xi: np.ndarray
    Xij: np.ndarray
    spec: EmbeddingSpec | None = None
    frame_boost: float | np.ndarray = 0.0
    outward_reference: np.ndarray | None = None
    require_spacelike_H: bool = True
    metric: InducedMetric = field(init=False)

    def __post_init__(self):
        be = self.backend
        self.g = be.metric(self.X)
        self.gamma = be.christoffel(self.X)
        h = np.einsum("...ab,...ia,...jb->...ij", self.g, self.Xi, self.Xi)
        try:
            self.metric = InducedMetric(self.grid, h)
        except GeometryError as exc:
            raise GeometryError("induced metric is not spacelike", node=exc.node) from None
        self._build_frame()
        gx = np.einsum("...abc,...ib,...jc->...ija", self.gamma, self.Xi, self.Xi)
        self.II = self.normal_part(self.Xij + gx)
        self.H = np.einsum("...ij,...ija->...a", self.metric.hinv, self.II)
        self.H_a = -self.inner(self.H, self.n)
        self.H_b = self.inner(self.H, self.v)
        self.HH = self.H_b**2 - self.H_a**2
        if self.require_spacelike_H and np.min(self.HH) <= EPS_H:
            idx = np.unravel_index(np.argmin(self.HH), self.HH.shape)
            raise SpacelikeMeanCurvatureError(
                f"<H,H> = {self.HH[idx]:.3e} is not above {EPS_H:g}", node=tuple(int(i) for i in idx)
            )

    # -- frame ----------------------------------------------------------------
    def _build_frame(self):
        u = self.normal_part(self.backend.time_direction(self.X))
        uu = self.inner(u, u)
        if np.max(uu) >= 0:
            raise GeometryError("chart time direction has no timelike normal part",
                                node=tuple(int(i) for i in np.unravel_index(np.argmax(uu), uu.shape)))
        n = u / np.sqrt(-uu)[..., None]
        ref = self.outward_reference
        if ref is None:
            ref = np.zeros_like(self.X)
            ref[..., 1:] = self.X[..., 1:]
        w = self.normal_part(ref)
        w = w + self.inner(w, n)[..., None] * n
        ww = self.inner(w, w)
        if np.min(ww) <= 0:
            raise GeometryError("outward reference direction degenerates in the normal plane")
        v = w / np.sqrt(ww)[..., None]
        fb = np.asarray(self.frame_boost, dtype=float)
        if np.any(fb != 0):
            c, s = np.cosh(fb)[..., None], np.sinh(fb)[..., None]
            n, v = c * n + s * v, s * n + c * v
        self.n, self.v = n, v

    # -- pointwise algebra -------------------------------------------------
    def inner(self, u, w):
        return _ambient_inner(self.g, u, w)

    def tangential_part(self, u):
        gu = np.einsum("...ab,...ia,...b->...i", self.g, self.Xi, u)
        c = np.einsum("...ij,...j->...i", self.metric.hinv, gu)
        return np.einsum("...i,...ia->...a", c, self.Xi)

    def normal_part(self, u):
        """Orthogonal projection of ambient vectors onto the normal plane.

        ``u`` has the node axes first and the ambient index last; any axes in
        between (e.g. the (i, j) of II) are carried along.
        """
        u = np.asarray(u, dtype=float)
        extra = u.ndim - 3
        g = self.g.reshape(self.g.shape[:2] + (1,) * extra + (4, 4))
        Xi = self.Xi.reshape(self.Xi.shape[:2] + (1,) * extra + (2, 4))
        hinv = self.metric.hinv.reshape(self.metric.hinv.shape[:2] + (1,) * extra + (2, 2))
        gu = np.einsum("...ab,...ia,...b->...i", g, Xi, u)
        c = np.einsum("...ij,...j->...i", hinv, gu)
        return u - np.einsum("...i,...ia->...a", c, Xi)

    def normal_decompose(self, u):
        """Split ``u`` into (tangential part, a, b) with u^nor = a n + b v."""
        tan = self.tangential_part(u)
        nor = u - tan
        return tan, -self.inner(nor, self.n), self.inner(nor, self.v)

    def normal_field(self, vec):
        """Frame components of an ambient normal field."""
        _, a, b = self.normal_decompose(vec)
        return NormalField(self, a, b)

    def perp_vector(self, w):
        _, a, b = self.normal_decompose(w)
        return b[..., None] * self.n + a[..., None] * self.v

    # -- mean curvature ------------------------------------------------------
    @property
    def H_norm(self):
        return np.sqrt(np.maximum(self.HH, 0.0))

    @cached_property
    def nu_H(self):
        """Unit outward-spacelike normal -H/|H| as a frame field."""
        self.require_spacelike()
        Hn = self.H_norm
        return NormalField(self, -self.H_a / Hn, -self.H_b / Hn)

    def require_spacelike(self):
        if np.min(self.HH) <= EPS_H:
            idx = np.unravel_index(np.argmin(self.HH), self.HH.shape)
            raise SpacelikeMeanCurvatureError(
                f"<H,H> = {self.HH[idx]:.3e} is not above {EPS_H:g}", node=tuple(int(i) for i in idx)
            )

    def scalar_form(self, nu):
        """II_nu(i, j) = -<II_ij, nu> for a NormalField or ambient normal vector."""
        vec = nu.vector if isinstance(nu, NormalField) else nu
        g = self.g[:, :, None, None]
        return -np.einsum("...ab,...a,...b->...", g, self.II, vec[:, :, None, None, :])

    def traceless_form(self, nu):
        return self.metric.traceless(self.scalar_form(nu))

    @property
    def area(self):
        return self.metric.area

    def check_frame(self, tol=1e-10):
        """Max violation of frame orthonormality and tangency."""
        errs = [
            np.abs(self.inner(self.n, self.n) + 1).max(),
            np.abs(self.inner(self.v, self.v) - 1).max(),
            np.abs(self.inner(self.n, self.v)).max(),
        ]
        for i in range(2):
            errs.append(np.abs(self.inner(self.Xi[:, :, i], self.n)).max())
            errs.append(np.abs(self.inner(self.Xi[:, :, i], self.v)).max())
        return max(errs)

    def to_csv(self, path):
        fields_to_csv(path, self.grid, X=self.X, H=self.H, HH=self.HH)


def surface_from_positions(X, grid, backend, **kw):
    """Evaluate a surface from node positions using spectral tangents."""
    X = np.asarray(X, dtype=float)
    backend.check_admissible(X)
    Xi, Xij = grid.partials(X, 1)
    return EmbeddedSurface(grid, backend, X, Xi, Xij, **kw)


def evaluate_surface(spec, grid, backend, tangents="auto", **kw):
    """Evaluate an :class:`EmbeddingSpec` on ``grid`` in ``backend``.

    ``tangents`` is ``"spectral"``, ``"analytic"`` or ``"auto"`` (analytic
    when the family has closed-form partials).
    """
    X = spec.positions(grid)
    backend.check_admissible(X)
    parts = spec.analytic_partials(grid) if tangents in ("auto", "analytic") else None
    if parts is None:
        if tangents == "analytic":
            raise ConfigurationError(f"family {spec.family!r} with nonzero amplitude has no analytic partials")
        parts = grid.partials(X, 1)
    return EmbeddedSurface(grid, backend, X, parts[0], parts[1], spec=spec, **kw)
