"""Normal-bundle connection form, frame boosts and time-flat frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import NormalField
from .errors import GeometryError

__all__ = [
    "ConnectionForm",
    "connection_form",
    "boost_frame",
    "functional_C",
    "minimize_frame",
    "connection_laplacian_residual",
    "time_flat_residual",
    "TimeFlatReport",
    "TAU_REL",
    "RESIDUAL_FLOOR",
]

TAU_REL = 1e-6
RESIDUAL_FLOOR = 1e-12


def tau_abs(area):
    return 1e-7 * np.sqrt(area)


@dataclass(eq=False)
class ConnectionForm:
    """alpha_nu(X) = <nabla_X nu, nu_perp> with parameter components (theta, phi)."""

    nu: NormalField
    alpha: np.ndarray
    antisymmetry: float  # max |<nabla nu_perp, nu> + alpha|

    @property
    def surface(self):
        return self.nu.surface

    @property
    def divergence(self):
        return self.surface.metric.divergence(self.alpha)

    @property
    def norm2(self):
        """Pointwise |alpha|^2_h."""
        return self.surface.metric.inner(self.alpha, self.alpha)

    @property
    def l2(self):
        return self.surface.metric.l2(np.sqrt(self.norm2))


def _covariant_along_tangents(surface, vec):
    """nabla_{X_i} vec for an ambient field sampled at nodes: [..., i, a]."""
    grid = surface.grid
    d = np.stack([grid.d_theta(vec, 1), grid.d_phi(vec)], axis=2)
    return d + np.einsum("...abc,...ib,...c->...ia", surface.gamma, surface.Xi, vec)


def connection_form(surface, nu, tol=1e-8):
    """Connection 1-form of a unit outward-spacelike normal field.

    The ambient covariant derivative of nu is taken along each tangent
    direction and paired with nu_perp; the normal projection is implicit
    because nu_perp is normal.
    """
    if not isinstance(nu, NormalField):
        nu = surface.normal_field(nu)
    if np.max(np.abs(nu.norm2 - 1)) > tol or np.any(nu.b <= 0):
        raise GeometryError("connection form needs a unit outward-spacelike normal")
    vec, pvec = nu.vector, nu.perp.vector
    g = surface.g[:, :, None]
    dnu = _covariant_along_tangents(surface, vec)
    dperp = _covariant_along_tangents(surface, pvec)
    alpha = np.einsum("...ab,...a,...b->...", g, dnu, pvec[:, :, None])
    beta = np.einsum("...ab,...a,...b->...", g, dperp, vec[:, :, None])
    return ConnectionForm(nu, alpha, float(np.max(np.abs(alpha + beta))))


def boost_frame(nu, theta):
    """cosh(theta) nu + sinh(theta) nu_perp."""
    return nu.boosted(theta)


def functional_C(form):
    """C(nu) = int |alpha_nu|^2 dA."""
    return float(form.surface.metric.integrate(form.norm2))


@dataclass
class MinimizeReport:
    C_initial: float
    C_final: float
    div_l2: float
    alpha_l2: float
    converged: bool

    def as_dict(self):
        return dict(self.__dict__)


def minimize_frame(surface, nu0):
    """Boost nu0 to the divergence-free ("straight out") frame.

    Solves Lap theta = div alpha_nu0 and boosts by theta, so the new form
    alpha - d theta is divergence free.  Returns ``(nu_star, theta, report)``.
    """
    if not isinstance(nu0, NormalField):
        nu0 = surface.normal_field(nu0)
    form0 = connection_form(surface, nu0)
    theta = surface.metric.solve_poisson(form0.divergence)
    nu_star = boost_frame(nu0, theta)
    form = connection_form(surface, nu_star)
    div_l2 = surface.metric.l2(form.divergence)
    report = MinimizeReport(
        C_initial=functional_C(form0),
        C_final=functional_C(form),
        div_l2=div_l2,
        alpha_l2=form.l2,
        converged=bool(div_l2 < 1e-8 * (1 + form.l2)),
    )
    return nu_star, theta, report


def connection_laplacian_residual(surface, nu):
    """Check (nabla_perp)^* nabla_perp nu = -|alpha|^2 nu + div(alpha) nu_perp.

    The rough Laplacian on the normal bundle is applied in divergence form,
    -(1/sqrt h) [d_i(sqrt h h^ij nabla_j nu)]^perp-part, with ambient
    covariant derivatives and normal projection at each stage.  Returns the
    residual fields along nu and along nu_perp (coefficients in the
    (nu, nu_perp) basis).
    """
    if not isinstance(nu, NormalField):
        nu = surface.normal_field(nu)
    metric = surface.metric
    vec, pvec = nu.vector, nu.perp.vector
    dnu = surface.normal_part(_covariant_along_tangents(surface, vec))
    flux = metric.sqrt_det[..., None, None] * np.einsum("...ij,...ja->...ia", metric.hinv, dnu)
    # flux_theta has glide parity +1: theta-index raised by h^{theta theta}
    # (even) and multiplied by the odd sqrt h
    grid = surface.grid
    dflux = grid.d_theta(flux[:, :, 0], 1) + grid.d_phi(flux[:, :, 1])
    dflux += np.einsum("...abc,...ib,...ic->...a", surface.gamma, surface.Xi, flux)
    lhs = -surface.normal_part(dflux) / metric.sqrt_det[..., None]
    form = connection_form(surface, nu)
    # coefficients of lhs in (nu, nu_perp): c_nu = <lhs, nu>, c_perp = -<lhs, nu_perp>
    c_nu = surface.inner(lhs, vec)
    c_perp = -surface.inner(lhs, pvec)
    res_nu = c_nu - (-form.norm2)
    res_perp = c_perp - form.divergence
    return res_nu, res_perp


@dataclass
class TimeFlatReport:
    r_abs: float
    r_rel: float
    is_time_flat: bool
    tau_abs: float
    alpha_l2: float
    grid: tuple

    def as_dict(self):
        return {
            "r_abs": self.r_abs,
            "r_rel": self.r_rel,
            "is_time_flat": self.is_time_flat,
            "tau_abs": self.tau_abs,
            "tau_rel": TAU_REL,
            "alpha_l2": self.alpha_l2,
            "grid": list(self.grid),
        }


def time_flat_residual(surface):
    """Residual of div alpha_H = 0 with absolute and relative thresholds."""
    form = connection_form(surface, surface.nu_H)
    r_abs = surface.metric.l2(form.divergence)
    a_l2 = form.l2
    r_rel = r_abs / (a_l2 + RESIDUAL_FLOOR)
    t_abs = tau_abs(surface.area)
    return TimeFlatReport(
        r_abs=float(r_abs),
        r_rel=float(r_rel),
        is_time_flat=bool(r_abs < t_abs or r_rel < TAU_REL),
        tau_abs=float(t_abs),
        alpha_l2=float(a_l2),
        grid=surface.grid.shape,
    )
