"""
Hawking mass and uniformly area expanding flows.

A uniformly area expanding velocity has the form

    xi = I + beta I_perp,   I = -H / <H, H>,

for a function beta with |beta| < 1, so that -<xi, H> = 1 and area grows
like e^lambda.  The first variation of the Hawking mass along such a flow is
computed three independent ways:

* ``variation_connection``: the integrand built from nu_H, its connection form
  alpha_H and the traceless forms of nu_H and nu_H_perp;
* ``variation_hypersurface``: the swept-hypersurface integrand built from the unit
  normal nu = xi/|xi| (mean curvature H_M, form A, momentum tensor p), with
  p_bar taken as the connection form of nu;
* ``variation_fd``: Richardson-extrapolated central differences of m_H
  along the flow itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .connection import connection_form, time_flat_residual
from .embedding import NormalField, surface_from_positions
from .errors import ConfigurationError, DomainError, FlowHaltError, GeometryError
from .sphere import random_smooth_field, real_harmonic

__all__ = [
    "BetaPolicy",
    "parse_beta",
    "hawking_mass",
    "hawking_mass_forms",
    "uae_velocity",
    "variation_connection",
    "variation_hypersurface",
    "variation_fd",
    "flow_step",
    "run_flow",
    "second_variation_fd",
    "gauge_diagnostic",
    "FlowState",
]

BETA_MARGIN = 1e-6
FOUR_PI = 4 * np.pi


# ---------------------------------------------------------------------------
# beta policies
# ---------------------------------------------------------------------------


class BetaPolicy:
    """A rule producing beta on a surface.

    ``text`` is the policy string it was parsed from.  Grammar::

        const:c              beta = c
        cart:ax,ay,az        beta = ax x + ay y + az z on the unit sphere
        ylm:l,m,amp          beta = amp * Y_lm / max|Y_lm|
        random:seed,lmax,amp band-limited field, degrees 0..lmax, max|beta| = amp
        slice                beta = -a / b for nu_H = a n + b v, which makes
                             the flow velocity tangent to the chart slice
    """

    def __init__(self, text, fn, constant=None):
        self.text = text
        self._fn = fn
        self.constant = constant

    def __call__(self, surface):
        beta = np.broadcast_to(np.asarray(self._fn(surface), dtype=float), surface.grid.shape)
        worst = float(np.max(np.abs(beta)))
        if worst >= 1 - BETA_MARGIN:
            raise ConfigurationError(f"beta policy {self.text!r} reaches |beta| = {worst:.6g}, needs < 1")
        return np.array(beta)

    def __repr__(self):
        return f"BetaPolicy({self.text!r})"


def _floats(body, n, text):
    try:
        vals = [float(v) for v in body.split(",")]
    except ValueError:
        raise ConfigurationError(f"beta policy {text!r}: expected numbers") from None
    if len(vals) != n:
        raise ConfigurationError(f"beta policy {text!r}: expected {n} values, got {len(vals)}")
    return vals


def parse_beta(text):
    """Parse a beta policy string, see :class:`BetaPolicy`."""
    if isinstance(text, BetaPolicy):
        return text
    if isinstance(text, (int, float)):
        text = f"const:{float(text)!r}"
    text = text.strip()
    kind, _, body = text.partition(":")
    kind = kind.lower()
    if kind == "const":
        (c,) = _floats(body, 1, text)
        policy = BetaPolicy(text, lambda s: c, constant=c)
    elif kind == "cart":
        ax, ay, az = _floats(body, 3, text)
        policy = BetaPolicy(text, lambda s: s.grid.unit_normal @ np.array([ax, ay, az]))
    elif kind == "ylm":
        l, m, amp = _floats(body, 3, text)
        l, m = int(l), int(m)
        if abs(m) > l or l > 6:
            raise ConfigurationError(f"beta policy {text!r}: need |m| <= l <= 6")

        def fn(s):
            y = real_harmonic(s.grid, l, m)
            return amp * y / np.max(np.abs(y))

        policy = BetaPolicy(text, fn)
    elif kind == "random":
        seed, lmax, amp = _floats(body, 3, text)
        if not 0 <= lmax <= 6:
            raise ConfigurationError(f"beta policy {text!r}: band limit must be in 0..6")
        policy = BetaPolicy(
            text, lambda s: random_smooth_field(s.grid, int(lmax), int(seed), amplitude=amp, lmin=0)
        )
    elif kind == "slice" and not body:
        policy = BetaPolicy(text, lambda s: -s.nu_H.a / s.nu_H.b)
    else:
        raise ConfigurationError(f"unknown beta policy {text!r}")
    # validate numeric ranges where they do not depend on the surface
    if policy.constant is not None and abs(policy.constant) >= 1 - BETA_MARGIN:
        raise ConfigurationError(f"beta policy {text!r}: |beta| must be < 1")
    if kind in ("cart", "ylm", "random"):
        bound = np.sqrt(ax**2 + ay**2 + az**2) if kind == "cart" else abs(amp)
        if bound >= 1 - BETA_MARGIN:
            raise ConfigurationError(f"beta policy {text!r}: max |beta| must be < 1")
    return policy


# ---------------------------------------------------------------------------
# Hawking mass
# ---------------------------------------------------------------------------


def hawking_mass_forms(surface):
    """Return ``(m_mean_curvature, m_split)``.

    The first uses <H, H> directly; the second writes <H, H> = H^2 - (tr k)^2
    with H = -<H, v> and tr k = -<H, n> in the stored frame.
    """
    area = surface.area
    pref = np.sqrt(area / (16 * np.pi))
    m1 = pref * (1 - surface.metric.integrate(surface.HH) / (16 * np.pi))
    Hv = -surface.inner(surface.H, surface.v)
    trk = -surface.inner(surface.H, surface.n)
    m2 = pref * (1 - surface.metric.integrate(Hv**2 - trk**2) / (16 * np.pi))
    return float(m1), float(m2)


def hawking_mass(surface):
    return hawking_mass_forms(surface)[0]


# ---------------------------------------------------------------------------
# velocities
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FlowVelocity:
    surface: object
    beta: np.ndarray
    xi: np.ndarray
    xi_perp: np.ndarray
    nu: NormalField

    def checks(self):
        """Max violations of -<xi, H> = 1 and beta = <xi, H_perp>."""
        s = self.surface
        e1 = np.abs(-s.inner(self.xi, s.H) - 1).max()
        Hperp = s.perp_vector(s.H)
        e2 = np.abs(s.inner(self.xi, Hperp) - self.beta).max()
        return float(e1), float(e2)


def uae_velocity(surface, beta):
    """xi = (nu_H + beta nu_H_perp)/|H| and its normalized direction nu."""
    surface.require_spacelike()
    if isinstance(beta, (str, BetaPolicy)):
        beta = parse_beta(beta)(surface)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), surface.grid.shape)
    if np.max(np.abs(beta)) >= 1 - BETA_MARGIN:
        raise ConfigurationError("beta must satisfy |beta| < 1 - 1e-6")
    Hn = surface.H_norm
    nuH = surface.nu_H
    a = (nuH.a + beta * nuH.b) / Hn
    b = (nuH.b + beta * nuH.a) / Hn
    xi = NormalField(surface, a, b)
    c = 1 / np.sqrt(1 - beta**2)
    nu = NormalField(surface, c * (nuH.a + beta * nuH.b), c * (nuH.b + beta * nuH.a))
    return FlowVelocity(surface, np.array(beta), xi.vector, xi.perp.vector, nu)


def _beta_field(surface, beta):
    if isinstance(beta, (str, BetaPolicy, int, float)):
        return parse_beta(beta)(surface)
    return np.broadcast_to(np.asarray(beta, dtype=float), surface.grid.shape)


# ---------------------------------------------------------------------------
# first variation: two integrands
# ---------------------------------------------------------------------------


def _prefactor(surface):
    return np.sqrt(surface.area / (16 * np.pi) ** 3)


def _einstein_pair(surface, u, w):
    G = surface.backend.einstein(surface.X)
    return np.einsum("...ab,...a,...b->...", G, u, w)


def variation_connection(surface, beta):
    """First variation of m_H from nu_H-adapted data.

    Integrand per node::

        2 G(nu_H_perp, nu_H_perp + beta nu_H)
        + |Å_H|^2 + 2 beta <Å_H, Å_perp> + |Å_perp|^2
        + 2 (|d log|H||^2 + 2 beta alpha_H(grad log|H|) + |alpha_H|^2 + beta div alpha_H)

    integrated and scaled by sqrt(|S|/(16 pi)^3); the Euler term
    4 pi (2 - chi) vanishes on spheres.
    """
    beta = _beta_field(surface, beta)
    metric = surface.metric
    nuH = surface.nu_H
    nuHp = nuH.perp
    einstein = 2 * _einstein_pair(surface, nuHp.vector, nuHp.vector + beta[..., None] * nuH.vector)
    a = surface.traceless_form(nuH)
    b = surface.traceless_form(nuHp)
    traceless = metric.tensor_inner(a, a) + 2 * beta * metric.tensor_inner(a, b) + metric.tensor_inner(b, b)
    form = connection_form(surface, nuH)
    dlog = metric.d(np.log(surface.H_norm))
    gradient = 2 * (metric.inner(dlog, dlog) + 2 * beta * metric.inner(form.alpha, dlog) + form.norm2)
    divergence = 2 * beta * form.divergence
    return _report(surface, "connection", dict(einstein=einstein, traceless=traceless, gradient=gradient,
                                          divergence=divergence))


def variation_hypersurface(surface, beta, check_beta=True):
    """First variation of m_H from the swept hypersurface with normal nu = xi/|xi|.

    H_M = -<H, nu>, A = -<II, nu>, p_S traceless part = <II, nu_perp>
    traceless, p_bar = alpha_nu, and 16 pi (mu - beta J) =
    2 G(nu_perp, nu_perp) - 2 beta G(nu, nu_perp).
    """
    beta = _beta_field(surface, beta)
    metric = surface.metric
    vel = uae_velocity(surface, beta)
    nu = vel.nu
    nup = nu.perp
    H_M = -surface.inner(surface.H, nu.vector)
    if check_beta:
        trk = -surface.inner(surface.H, nup.vector)
        err = np.max(np.abs(trk / H_M - beta))
        if err > 1e-8:
            raise GeometryError(f"beta differs from tr k / H by {err:.3e}")
    energy = 2 * _einstein_pair(surface, nup.vector, nup.vector) - 2 * beta * _einstein_pair(
        surface, nu.vector, nup.vector
    )
    A = surface.traceless_form(nu)
    p = -surface.traceless_form(nup)
    traceless = metric.tensor_inner(A, A) + 2 * beta * metric.tensor_inner(A, p) + metric.tensor_inner(p, p)
    pbar = connection_form(surface, nu)
    dlog = metric.d(np.log(H_M))
    gradient = 2 * (metric.inner(dlog, dlog) + 2 * beta * metric.inner(pbar.alpha, dlog) + pbar.norm2)
    divergence = -2 * beta * pbar.divergence
    return _report(surface, "hypersurface", dict(einstein=energy, traceless=traceless, gradient=gradient,
                                        divergence=divergence))


def _report(surface, name, integrands):
    metric = surface.metric
    terms = {k: float(metric.integrate(v)) for k, v in integrands.items()}
    terms["euler"] = 0.0
    pref = _prefactor(surface)
    return {
        "value": float(pref * sum(terms.values())),
        "prefactor": float(pref),
        "terms": terms,
        "formula": name,
    }


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------


def _rebuild(surface, X):
    return surface_from_positions(X, surface.grid, surface.backend)


RK4_MARGIN = 2.0  # below the real-axis stability limit 2.785 of classical RK4


def stable_degree(surface, dlam):
    """Largest harmonic degree L that an explicit step of size dlam keeps stable.

    The normal part of the flow is parabolic with diffusion |H|^-2, so mode
    l decays at rate about l(l+1) / (|H|^2 R^2), R^2 = |S|/4pi.  Requiring
    |dlam| times that rate below RK4_MARGIN bounds L.  Capped at the grid's
    resolved degree n_theta - 1.
    """
    grid = surface.grid
    if dlam == 0:
        return grid.n_theta - 1
    scale = float(np.min(surface.HH)) * surface.area / (4 * np.pi)
    bound = RK4_MARGIN * scale / abs(dlam)
    L = int(np.floor((-1 + np.sqrt(1 + 4 * bound)) / 2))
    return max(1, min(L, grid.n_theta - 1))


def flow_step(surface, beta, dlam, degree="auto"):
    """One classical Runge-Kutta step of dX/dlambda = xi, beta re-evaluated per stage.

    Stage velocities are projected onto spherical harmonics of degree <=
    ``degree`` ("auto": :func:`stable_degree`); without this, roundoff in
    the highest resolved modes is amplified by the stiffness of the flow.
    """
    policy = parse_beta(beta) if not callable(beta) else beta
    grid = surface.grid
    L = stable_degree(surface, dlam) if degree == "auto" else int(degree)

    def rate(s):
        return grid.project(uae_velocity(s, policy(s)).xi, L)

    X0 = surface.X
    k1 = rate(surface)
    k2 = rate(_rebuild(surface, X0 + 0.5 * dlam * k1))
    k3 = rate(_rebuild(surface, X0 + 0.5 * dlam * k2))
    k4 = rate(_rebuild(surface, X0 + dlam * k3))
    return _rebuild(surface, X0 + dlam / 6 * (k1 + 2 * k2 + 2 * k3 + k4))


@dataclass
class FlowState:
    records: list = field(default_factory=list)
    surfaces: list = field(default_factory=list)
    halted: str | None = None

    @property
    def final(self):
        return self.surfaces[-1]

    def column(self, key):
        return np.array([r[key] for r in self.records])

    def to_csv(self, path):
        keys = list(self.records[0])
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in self.records:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})

    def summary(self):
        lam = self.column("lambda")
        return {
            "steps": len(self.records) - 1,
            "lambda_final": float(lam[-1]),
            "m_H_initial": self.records[0]["m_H"],
            "m_H_final": self.records[-1]["m_H"],
            "max_area_rel_err": float(np.max(self.column("area_rel_err"))),
            "m_H_nondecreasing": bool(np.all(np.diff(self.column("m_H")) >= -1e-12)),
            "halted": self.halted,
        }


def _record(surface, lam, area0, policy, timeflat):
    beta = policy(surface)
    rec = {
        "lambda": float(lam),
        "area": float(surface.area),
        "area_rel_err": float(abs(surface.area - area0 * np.exp(lam)) / (area0 * np.exp(lam))),
        "m_H": hawking_mass(surface),
        "beta_min": float(beta.min()),
        "beta_max": float(beta.max()),
    }
    if timeflat:
        tf = time_flat_residual(surface)
        rec["tf_r_abs"] = tf.r_abs
        rec["tf_r_rel"] = tf.r_rel
    return rec


def run_flow(surface, beta, dlam=1e-2, n_steps=100, timeflat=True, keep_surfaces=False):
    """Integrate the flow for ``n_steps``; stops with a halt note on degeneration.

    Raises :class:`FlowHaltError` only when the very first step fails.
    """
    policy = parse_beta(beta)
    area0 = surface.area
    state = FlowState()
    state.records.append(_record(surface, 0.0, area0, policy, timeflat))
    state.surfaces.append(surface)
    current, lam = surface, 0.0
    for _ in range(n_steps):
        try:
            current = flow_step(current, policy, dlam)
        except (GeometryError, DomainError) as exc:
            if lam == 0.0:
                raise FlowHaltError(str(exc), lam) from exc
            state.halted = f"{exc} (last good lambda = {lam:g})"
            break
        lam += dlam
        state.records.append(_record(current, lam, area0, policy, timeflat))
        if keep_surfaces:
            state.surfaces.append(current)
    if not keep_surfaces and current is not surface:
        state.surfaces.append(current)
    return state


def _mass_at(surface, policy, lam, family):
    if family == "flow":
        # a single short step needs no stiffness control; keep every resolved mode
        return hawking_mass(flow_step(surface, policy, lam, degree=surface.grid.n_theta - 1))
    xi = uae_velocity(surface, policy(surface)).xi
    return hawking_mass(_rebuild(surface, surface.X + lam * xi))


def variation_fd(surface, beta, h=1e-3, family="line"):
    """Central-difference first variation with one Richardson step.

    ``family="line"`` uses X + lambda xi in chart coordinates, which has the
    flow velocity at lambda = 0 and no stiffness; ``family="flow"`` takes one
    Runge-Kutta step of size +-h, whose h^2 error carries the stiff modes and
    dominates on under-resolved surfaces.
    """
    policy = parse_beta(beta)

    def central(step):
        return (_mass_at(surface, policy, step, family) - _mass_at(surface, policy, -step, family)) / (2 * step)

    d1 = central(h)
    d2 = central(h / 2)
    return {"value": float((4 * d2 - d1) / 3), "error_bar": float(abs(d2 - d1)), "d_h": float(d1),
            "d_h2": float(d2), "h": h, "family": family}


def second_variation_fd(surface, beta, h=1e-2):
    """Second central difference of m_H along the flow."""
    policy = parse_beta(beta)
    m0 = hawking_mass(surface)
    mp = hawking_mass(flow_step(surface, policy, h))
    mm = hawking_mass(flow_step(surface, policy, -h))
    return float((mp - 2 * m0 + mm) / h**2)


def gauge_diagnostic(surface, beta):
    """int <T, nu> dA with T the unit chart time direction (reported only)."""
    vel = uae_velocity(surface, _beta_field(surface, beta))
    e = surface.backend.time_direction(surface.X)
    T = e / np.sqrt(-surface.inner(e, e))[..., None]
    return float(surface.metric.integrate(surface.inner(T, vel.nu.vector)))
