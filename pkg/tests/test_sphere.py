import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timeflat.errors import ConfigurationError, GeometryError, SolvabilityError
from timeflat.sphere import (
    InducedMetric,
    build_grid,
    fields_to_csv,
    random_smooth_field,
    real_harmonic,
)


def round_metric(grid, radius=1.0):
    th, _ = grid.mesh
    h = np.zeros(grid.shape + (2, 2))
    h[..., 0, 0] = radius**2
    h[..., 1, 1] = (radius * np.sin(th)) ** 2
    return InducedMetric(grid, h)


def perturbed_metric(grid, eps=0.1, seed=3):
    """Metric of r = 1 + eps f in flat R^3 for a random smooth f."""
    f = random_smooth_field(grid, 4, seed, amplitude=eps)
    r = 1 + f
    th, _ = grid.mesh
    r_t, r_p = grid.d_theta(r), grid.d_phi(r)
    h = np.zeros(grid.shape + (2, 2))
    h[..., 0, 0] = r**2 + r_t**2
    h[..., 1, 1] = (r * np.sin(th)) ** 2 + r_p**2
    h[..., 0, 1] = h[..., 1, 0] = r_t * r_p
    return InducedMetric(grid, h)


@pytest.fixture(scope="module")
def g24():
    return build_grid(24, 48)


@pytest.fixture(scope="module")
def unit(g24):
    return round_metric(g24)


def test_round_area_is_exact(unit):
    assert abs(unit.area - 4 * np.pi) / (4 * np.pi) < 1e-12


def test_harmonic_orthonormality(g24, unit):
    y20 = real_harmonic(g24, 2, 0)
    assert unit.integrate(y20**2) == pytest.approx(1.0, abs=1e-12)
    assert abs(unit.integrate(y20 * real_harmonic(g24, 2, 1))) < 1e-12
    assert unit.integrate(real_harmonic(g24, 3, -2) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_phi_derivative_of_trig(g24):
    th, ph = g24.mesh
    d = g24.d_phi(np.sin(th) * np.cos(ph))
    assert np.max(np.abs(d + np.sin(th) * np.sin(ph))) < 1e-10


def test_grid_rejects_coarse_sizes():
    with pytest.raises(ConfigurationError):
        build_grid(4, 16)
    with pytest.raises(ConfigurationError):
        build_grid(16, 31)


def test_gradient_of_constant_vanishes(unit, g24):
    df, vec = unit.gradient(np.full(g24.shape, 3.7))
    assert np.max(np.abs(df)) < 1e-13 and np.max(np.abs(vec)) < 1e-13
    assert np.max(np.abs(unit.laplacian(np.full(g24.shape, 3.7)))) < 1e-11


def test_gradient_norm_of_cos(unit, g24):
    th, _ = g24.mesh
    df, vec = unit.gradient(np.cos(th))
    n2 = unit.inner(df, df)
    assert np.max(np.abs(np.einsum("...i,...i->...", df, vec) - n2)) < 1e-14
    assert np.max(np.abs(n2 - np.sin(th) ** 2) / np.sin(th) ** 2) < 1e-8


def test_gradient_scales_with_inverse_radius_squared(g24, unit):
    f = random_smooth_field(g24, 4, 1)
    big = round_metric(g24, 3.0)
    assert np.allclose(big.d(f), unit.d(f), atol=1e-14)
    assert np.max(np.abs(big.gradient(f)[1] - unit.gradient(f)[1] / 9)) < 1e-12


def test_laplacian_eigenvalue(unit, g24):
    th, _ = g24.mesh
    lap = unit.laplacian(np.cos(th))
    assert np.max(np.abs(lap + 2 * np.cos(th))) / 2 < 1e-8
    y = real_harmonic(g24, 3, 2)
    assert np.max(np.abs(unit.laplacian(y) + 12 * y)) < 1e-9


def test_poisson_inverts_l1(unit, g24):
    th, _ = g24.mesh
    f = unit.solve_poisson(-2 * np.cos(th))
    assert np.max(np.abs(f - np.cos(th))) < 1e-10
    assert np.all(unit.solve_poisson(np.zeros(g24.shape)) == 0)


def test_poisson_rejects_unsolvable(unit, g24):
    with pytest.raises(SolvabilityError):
        unit.solve_poisson(np.ones(g24.shape))


def test_gauss_curvature(g24, unit):
    assert np.max(np.abs(unit.gauss_curvature - 1)) < 1e-6
    assert np.max(np.abs(round_metric(g24, 2.0).gauss_curvature - 0.25)) < 1e-6
    h = perturbed_metric(g24)
    assert abs(h.integrate(h.gauss_curvature) - 4 * np.pi) / (4 * np.pi) < 1e-6


def test_degenerate_metric_reports_node(g24):
    h = np.zeros(g24.shape + (2, 2))
    h[..., 0, 0] = h[..., 1, 1] = 1.0
    h[3, 5] = 0.0
    with pytest.raises(GeometryError) as exc:
        InducedMetric(g24, h)
    assert "(3, 5)" in str(exc.value)


def test_spectral_convergence_of_laplacian():
    """Doubling resolution improves an analytic-field error by 10^3 or reaches the floor."""
    errs = []
    for n in (8, 16):
        g = build_grid(n, 2 * n)
        th, ph = g.mesh
        z = np.sin(th) * np.cos(ph)
        f = np.exp(z)
        # closed form on the unit sphere: lap e^z = e^z (|grad z|^2 + lap z), lap z = -2z
        exact = f * (1 - z**2 - 2 * z)
        errs.append(np.max(np.abs(round_metric(g).laplacian(f) - exact)))
    assert errs[1] < max(errs[0] / 1e3, 1e-12)


def test_fields_csv_layout(tmp_path, g24):
    th, _ = g24.mesh
    w = np.stack([th, 2 * th], axis=-1)
    path = tmp_path / "f.csv"
    fields_to_csv(path, g24, f=th, w=w)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta,phi,f,w_0,w_1"
    assert len(lines) == 1 + g24.size
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == pytest.approx(th[0, 0]) and first[4] == pytest.approx(2 * th[0, 0])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.2))
def test_divergence_theorem_and_poisson_round_trip(seed, eps):
    # 32x64 resolves the degree-4 radius profile; coarser grids alias at eps ~ 0.2
    g = build_grid(32, 64)
    h = perturbed_metric(g, eps=eps, seed=seed % 97) if eps > 0 else round_metric(g)
    f = random_smooth_field(g, 5, seed)
    w = h.d(f) + f[..., None] * h.d(random_smooth_field(g, 3, seed + 1))
    assert abs(h.integrate(h.divergence(w))) < 1e-9 * (1 + h.l2(np.linalg.norm(w, axis=-1)))
    rhs = h.laplacian(f)
    rhs = rhs - h.mean(rhs)
    sol = h.solve_poisson(rhs)
    assert h.l2(h.laplacian(sol) - rhs) < 1e-9 * (1 + h.l2(rhs))
    assert abs(h.mean(sol)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 5.0), st.floats(-3, 3))
def test_laplacian_kills_constants(radius, c):
    g = build_grid(12, 24)
    h = round_metric(g, radius)
    assert np.max(np.abs(h.laplacian(np.full(g.shape, c)))) < 1e-10 * (1 + abs(c))
