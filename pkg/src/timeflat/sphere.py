"""
Spectral calculus on a genus-0 parameter sphere.

Nodes are Gauss-Legendre in colatitude (poles excluded) times a uniform
periodic grid in longitude.  Fields are arrays whose first two axes are
``(n_theta, n_phi)``; any trailing axes are carried along untouched, so a
1-form is ``(..., 2)`` with components ``(theta, phi)`` and a symmetric
2-tensor is ``(..., 2, 2)``.

theta-derivatives are parity aware.  Under the glide (theta, phi) ->
(-theta, phi + pi), which fixes every point of the sphere, a coordinate
component picks up a factor -1 per theta index.  The Fourier mode m of a
field with glide parity s is then even in theta when s*(-1)**m = +1, i.e. a
polynomial in mu = cos(theta), and otherwise sin(theta) times such a
polynomial.  Both classes are interpolated at the Gauss-Legendre nodes and
differentiated exactly, which keeps tensor components spectrally accurate up
to the poles.  Callers pass the parity of the field being differentiated
(``+1`` for scalars and theta-free components).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from numpy.polynomial.legendre import leggauss
from scipy.special import sph_harm_y

from .errors import ConfigurationError, ConvergenceError, GeometryError, SolvabilityError

__all__ = [
    "SurfaceGrid",
    "InducedMetric",
    "build_grid",
    "gradient",
    "divergence",
    "laplace_beltrami",
    "solve_poisson",
    "gauss_curvature",
    "real_harmonic",
    "random_smooth_field",
    "fields_to_csv",
]


def _gl_diff_matrix(x, w):
    """Barycentric differentiation matrix for polynomial interpolation at GL nodes."""
    lam = (-1.0) ** np.arange(len(x)) * np.sqrt((1 - x**2) * w)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (lam[None, :] / lam[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(eq=False)
class SurfaceGrid:
    """Gauss-Legendre x Fourier grid on the parameter sphere."""

    n_theta: int
    n_phi: int
    mu: np.ndarray = field(init=False, repr=False)
    theta: np.ndarray = field(init=False, repr=False)
    phi: np.ndarray = field(init=False, repr=False)
    gl_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_theta < 8 or self.n_phi < 16 or self.n_phi % 2:
            raise ConfigurationError(
                f"grid {self.n_theta}x{self.n_phi} too coarse: need n_theta >= 8, "
                "n_phi >= 16 and n_phi even"
            )
        x, w = leggauss(self.n_theta)
        # north to south: theta increasing
        self.mu = x[::-1].copy()
        self.gl_weights = w[::-1].copy()
        self.theta = np.arccos(self.mu)
        self.phi = 2 * np.pi * np.arange(self.n_phi) / self.n_phi
        s, c = np.sqrt(1 - self.mu**2), self.mu
        Dmu = _gl_diff_matrix(self.mu, self.gl_weights)
        self._sin = s
        # f = G(mu)          ->  f' = -sin G'(mu)
        self._D_even = -s[:, None] * Dmu
        # f = sin * G(mu)    ->  f' = cos G - sin^2 G'(mu)
        self._D_odd = np.diag(c / s) - (s**2)[:, None] * Dmu / s[None, :]
        m = np.arange(self.n_phi // 2 + 1)
        self._m = m
        self._m_even = m % 2 == 0

    @property
    def shape(self):
        return (self.n_theta, self.n_phi)

    @property
    def size(self):
        return self.n_theta * self.n_phi

    @cached_property
    def mesh(self):
        """(theta, phi) node arrays of shape ``grid.shape``."""
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    @cached_property
    def sin_theta(self):
        return np.broadcast_to(self._sin[:, None], self.shape)

    @cached_property
    def unit_normal(self):
        """Unit-sphere position (x, y, z) at every node."""
        th, ph = self.mesh
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)

    @cached_property
    def quadrature(self):
        """Weights W with  int f dA = sum W * f * sqrt(det h) over nodes."""
        return self.gl_weights[:, None] * (2 * np.pi / self.n_phi) / self._sin[:, None] * np.ones(self.n_phi)

    def _expand(self, arr, f):
        return arr.reshape(arr.shape + (1,) * (f.ndim - 2))

    def d_phi(self, f, order=1):
        f = np.asarray(f, dtype=float)
        F = np.fft.rfft(f, axis=1)
        ik = (1j * self._m) ** order
        if order % 2 and self.n_phi % 2 == 0:
            ik = ik.copy()
            ik[-1] = 0.0
        F = F * ik.reshape((1, -1) + (1,) * (f.ndim - 2))
        return np.fft.irfft(F, n=self.n_phi, axis=1)

    def d_theta(self, f, parity=1):
        """theta-derivative of a field with the given glide parity (+1 or -1)."""
        f = np.asarray(f, dtype=float)
        F = np.fft.rfft(f, axis=1)
        even_class = self._m_even if parity > 0 else ~self._m_even
        out = np.empty_like(F)
        out[:, even_class] = np.einsum("ij,jm...->im...", self._D_even, F[:, even_class])
        out[:, ~even_class] = np.einsum("ij,jm...->im...", self._D_odd, F[:, ~even_class])
        return np.fft.irfft(out, n=self.n_phi, axis=1)

    def d_theta2(self, f, parity=1):
        return self.d_theta(self.d_theta(f, parity), -parity)

    def partials(self, f, parity=1):
        """First and second partials of f: (f_i [...,2], f_ij [...,2,2])."""
        ft = self.d_theta(f, parity)
        fp = self.d_phi(f)
        ftt = self.d_theta(ft, -parity)
        ftp = self.d_phi(ft)
        fpp = self.d_phi(f, 2)
        first = np.stack([ft, fp], axis=2)
        second = np.stack([np.stack([ftt, ftp], axis=2), np.stack([ftp, fpp], axis=2)], axis=2)
        return first, second

    def _filter_matrices(self, degree):
        cache = self.__dict__.setdefault("_filters", {})
        if degree not in cache:
            mats = []
            th = self.theta
            wq = 2 * np.pi * self.gl_weights
            for m in self._m:
                if m > degree:
                    mats.append(None)
                    continue
                P = np.array([sph_harm_y(l, m, th, 0.0).real for l in range(m, degree + 1)])
                mats.append(P.T @ (P * wq[None, :]))
            cache[degree] = mats
        return cache[degree]

    def project(self, f, degree):
        """Orthogonal projection onto spherical harmonics of degree <= ``degree``.

        Exact for fields band-limited to degree n_theta - 1.
        """
        degree = int(degree)
        if degree >= self.n_theta - 1 and degree >= self.n_phi // 2:
            return np.asarray(f, dtype=float)
        f = np.asarray(f, dtype=float)
        F = np.fft.rfft(f, axis=1)
        out = np.zeros_like(F)
        for m, Q in enumerate(self._filter_matrices(degree)):
            if Q is not None and not (m == self.n_phi // 2):
                out[:, m] = np.einsum("jk,k...->j...", Q, F[:, m])
        return np.fft.irfft(out, n=self.n_phi, axis=1)

    def evaluate(self, fn):
        """Evaluate ``fn(theta, phi)`` on the nodes."""
        th, ph = self.mesh
        return np.asarray(fn(th, ph), dtype=float)


def build_grid(n_theta, n_phi):
    return SurfaceGrid(int(n_theta), int(n_phi))


def real_harmonic(grid, l, m):
    """Orthonormal real spherical harmonic Y_lm (m < 0: sine type) on the grid."""
    th, ph = grid.mesh
    y = sph_harm_y(l, abs(m), th, ph)
    if m == 0:
        return y.real
    cs = (-1) ** abs(m)
    return np.sqrt(2) * cs * (y.imag if m < 0 else y.real)


def random_smooth_field(grid, lmax, seed, amplitude=None, lmin=1):
    """Band-limited random field with degrees lmin..lmax.

    With ``amplitude`` set, the field is rescaled so max |f| = amplitude.
    """
    rng = np.random.default_rng(seed)
    f = np.zeros(grid.shape)
    for l in range(lmin, lmax + 1):
        for m in range(-l, l + 1):
            f += rng.normal() / (1 + l) * real_harmonic(grid, l, m)
    if amplitude is not None:
        f *= amplitude / np.max(np.abs(f))
    return f


class InducedMetric:
    """Riemannian metric h_ij on the parameter sphere with its calculus."""

    def __init__(self, grid, h):
        self.grid = grid
        h = np.asarray(h, dtype=float)
        self.h = 0.5 * (h + np.swapaxes(h, -1, -2))
        det = self.h[..., 0, 0] * self.h[..., 1, 1] - self.h[..., 0, 1] ** 2
        bad = (det <= 0) | (self.h[..., 0, 0] <= 0)
        if np.any(bad):
            idx = np.unravel_index(np.argmax(bad), bad.shape)
            raise GeometryError("induced metric is not positive definite", node=tuple(int(i) for i in idx))
        self.det = det
        self.sqrt_det = np.sqrt(det)
        inv = np.empty_like(self.h)
        inv[..., 0, 0] = self.h[..., 1, 1] / det
        inv[..., 1, 1] = self.h[..., 0, 0] / det
        inv[..., 0, 1] = inv[..., 1, 0] = -self.h[..., 0, 1] / det
        self.hinv = inv
        self.dA = grid.quadrature * self.sqrt_det

    @property
    def area(self):
        return float(self.dA.sum())

    def integrate(self, f):
        f = np.asarray(f)
        return np.tensordot(self.dA, f, axes=([0, 1], [0, 1]))

    def l2(self, f):
        return float(np.sqrt(max(self.integrate(np.asarray(f) ** 2), 0.0)))

    def mean(self, f):
        return self.integrate(f) / self.area

    # -- pointwise algebra ------------------------------------------------
    def raise_index(self, w):
        return np.einsum("...ij,...j->...i", self.hinv, w)

    def inner(self, a, b):
        return np.einsum("...ij,...i,...j->...", self.hinv, a, b)

    def trace(self, T):
        return np.einsum("...ij,...ij->...", self.hinv, T)

    def traceless(self, T):
        return T - 0.5 * self.trace(T)[..., None, None] * self.h

    def tensor_inner(self, S, T):
        return np.einsum("...ik,...jl,...ij,...kl->...", self.hinv, self.hinv, S, T)

    # -- differential operators ------------------------------------------
    def gradient(self, f):
        """Return ``(df, grad f)``: the lowered and raised gradient of a scalar."""
        df = self.d(f)
        return df, self.raise_index(df)

    def d(self, f):
        g = self.grid
        return np.stack([g.d_theta(f, 1), g.d_phi(f)], axis=2)

    def divergence(self, w):
        """div of a 1-form ``w`` with components on axis 2 (trailing batch axes allowed).

        Covariant form h^ij (w_j,i - Gamma^k_ij w_k), consistent with
        :meth:`laplacian` so that div(df) equals the Laplacian node by node.
        """
        g = self.grid
        w = np.asarray(w, dtype=float)
        dw = np.empty(w.shape[:2] + (2,) + w.shape[2:])
        # dw[:, :, i, j] = d_i w_j ; w_theta has glide parity -1
        dw[:, :, 0, 0] = g.d_theta(w[:, :, 0], -1)
        dw[:, :, 0, 1] = g.d_theta(w[:, :, 1], 1)
        dw[:, :, 1, 0] = g.d_phi(w[:, :, 0])
        dw[:, :, 1, 1] = g.d_phi(w[:, :, 1])
        c = np.einsum("...ij,...kij->...k", self.hinv, self.christoffel)
        extra = (1,) * (w.ndim - 3)
        hi = self.hinv.reshape(self.hinv.shape + extra)
        c = c.reshape(c.shape + extra)
        return np.sum(hi * dw, axis=(2, 3)) - np.sum(c * w, axis=2)

    def laplacian(self, f):
        """Laplace-Beltrami of a scalar (trailing batch axes allowed).

        Uses h^ij (f_ij - Gamma^k_ij f_k): the divergence form would multiply
        nodal values by sin(theta) before re-differentiating, which aliases
        at the Gauss-Legendre nodes and adds spurious kernel vectors.
        """
        first, second = self.grid.partials(f, 1)
        c = np.einsum("...ij,...kij->...k", self.hinv, self.christoffel)
        extra = (1,) * (np.ndim(f) - 2)
        hi = self.hinv.reshape(self.hinv.shape + extra)
        c = c.reshape(c.shape + extra)
        return np.sum(hi * second, axis=(2, 3)) - np.sum(c * first, axis=2)

    @cached_property
    def christoffel(self):
        """Gamma^k_ij of h, array [..., k, i, j]."""
        g = self.grid
        h = self.h
        # d_c h_ab with parity (-1)^(#theta indices among a, b)
        dh = np.empty(h.shape[:2] + (2, 2, 2))
        for a in range(2):
            for b in range(2):
                par = (-1) ** ((a == 0) + (b == 0))
                dh[:, :, 0, a, b] = g.d_theta(h[..., a, b], par)
                dh[:, :, 1, a, b] = g.d_phi(h[..., a, b])
        s = np.einsum("...bdc->...dbc", dh) + np.einsum("...cdb->...dbc", dh) - dh
        return 0.5 * np.einsum("...ad,...dbc->...abc", self.hinv, s)

    @cached_property
    def gauss_curvature(self):
        """K = (1/sqrt g)[ d_phi(sqrt g Gamma^phi_tt / E) - d_theta(sqrt g Gamma^phi_tp / E) ]."""
        g = self.grid
        gam = self.christoffel
        E = self.h[..., 0, 0]
        a = self.sqrt_det * gam[..., 1, 0, 0] / E
        b = self.sqrt_det * gam[..., 1, 0, 1] / E
        return (g.d_phi(a) - g.d_theta(b, 1)) / self.sqrt_det

    @cached_property
    def laplacian_matrix(self):
        """Dense collocation matrix of the Laplace-Beltrami operator."""
        n = self.grid.size
        eye = np.eye(n).reshape(self.grid.shape + (n,))
        return self.laplacian(eye).reshape(n, n)

    @cached_property
    def _poisson_lu(self):
        n = self.grid.size
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = self.laplacian_matrix
        A[:n, n] = 1.0
        A[n, :n] = self.dA.ravel() / self.area
        return scipy.linalg.lu_factor(A)

    def solve_poisson(self, rhs, tol=1e-10):
        """Mean-zero solution of Laplace-Beltrami f = rhs.

        Dense LU on the collocation operator bordered by the mean-zero
        constraint; the multiplier absorbs the quadrature-level defect of the
        solvability condition.
        """
        rhs = np.asarray(rhs, dtype=float)
        norm = self.l2(rhs)
        # relative test in the L2 scale, plus a quadrature roundoff floor
        if abs(self.integrate(rhs)) > 1e-8 * norm * np.sqrt(self.area) + 1e-13 * self.area:
            raise SolvabilityError(
                f"Poisson right-hand side has integral {self.integrate(rhs):.3e} (norm {norm:.3e})"
            )
        if norm == 0:
            return np.zeros(self.grid.shape)
        n = self.grid.size
        b = np.concatenate([rhs.ravel(), [0.0]])
        sol = scipy.linalg.lu_solve(self._poisson_lu, b)
        f = sol[:n].reshape(self.grid.shape)
        res = self.l2(self.laplacian(f) - rhs)
        if res > tol * (norm + 1):
            raise ConvergenceError("Poisson solve missed its residual target", res)
        return f


def gradient(f, h):
    return h.gradient(f)


def divergence(w, h):
    return h.divergence(w)


def laplace_beltrami(f, h):
    return h.laplacian(f)


def solve_poisson(rhs, h):
    return h.solve_poisson(rhs)


def gauss_curvature(h):
    return h.gauss_curvature


def fields_to_csv(path, grid, **fields):
    """Write node fields to CSV, row-major theta-then-phi, one column per component."""
    th, ph = grid.mesh
    cols = {"theta": th.ravel(), "phi": ph.ravel()}
    for name, val in fields.items():
        val = np.asarray(val)
        flat = val.reshape(grid.size, -1)
        if flat.shape[1] == 1:
            cols[name] = flat[:, 0]
        else:
            comps = np.ndindex(*val.shape[2:])
            for k, idx in enumerate(comps):
                cols[name + "_" + "".join(str(i) for i in idx)] = flat[:, k]
    header = ",".join(cols)
    data = np.column_stack(list(cols.values()))
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
