import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timeflat.embedding import EmbeddingSpec, evaluate_surface, parse_profile, perp
from timeflat.errors import ConfigurationError, GeometryError, SpacelikeMeanCurvatureError
from timeflat.hawking import hawking_mass
from timeflat.spacetimes import Minkowski, Schwarzschild
from timeflat.sphere import build_grid


def test_unit_sphere_geometry(unit_sphere):
    assert abs(unit_sphere.area - 4 * np.pi) < 1e-12
    assert np.max(np.abs(unit_sphere.HH - 4)) < 1e-10
    # H points radially inward
    radial = unit_sphere.X[..., 1:]
    assert np.all(np.einsum("...a,...a->...", unit_sphere.H[..., 1:], radial) < 0)
    assert np.max(np.abs(unit_sphere.H[..., 0])) < 1e-12


def test_schwarzschild_mean_curvature(schwarzschild_sphere):
    # (4/r^2)(1 - 2m/r) with m = 1, r = 4
    assert np.max(np.abs(schwarzschild_sphere.HH - 0.125)) < 1e-10


def test_graph_sphere_evaluates(grid):
    s = evaluate_surface(EmbeddingSpec("graph", 1.0, 0.0, 0.2, "cos"), grid, Minkowski())
    assert np.all(np.linalg.eigvalsh(s.metric.h) > 0)
    assert s.check_frame() < 1e-10


def test_frame_invariants(graph_sphere, perturbed_sphere, schwarzschild_sphere, flrw_sphere):
    for s in (graph_sphere, perturbed_sphere, schwarzschild_sphere, flrw_sphere):
        assert s.check_frame() < 1e-10
        assert np.all(s.n[..., 0] > 0)
        assert np.all(s.inner(s.v, s.X * np.array([0, 1, 1, 1])) > 0)


def test_perp_swaps_frame_legs():
    assert perp(1.0, 0.0) == (0.0, 1.0)
    assert perp(0.0, 1.0) == (1.0, 0.0)


@settings(max_examples=50)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_perp_is_involution_and_flips_norm(a, b):
    pa, pb = perp(a, b)
    assert perp(pa, pb) == (a, b)
    # <a n + b v, a n + b v> = b^2 - a^2
    assert pb**2 - pa**2 == pytest.approx(-(b**2 - a**2), abs=1e-9)


def test_perp_vector_matches_component_swap(graph_sphere):
    s = graph_sphere
    w = 0.3 * s.n + 1.7 * s.v
    assert np.max(np.abs(s.perp_vector(w) - (1.7 * s.n + 0.3 * s.v))) < 1e-12


def test_normal_decompose(graph_sphere, rng):
    s = graph_sphere
    tan, a, b = s.normal_decompose(s.n)
    assert np.max(np.abs(tan)) < 1e-12 and np.max(np.abs(a - 1)) < 1e-12 and np.max(np.abs(b)) < 1e-12
    Xt = s.Xi[:, :, 0]
    tan, a, b = s.normal_decompose(Xt)
    assert np.max(np.abs(tan - Xt)) < 1e-12 and np.max(np.abs(a)) < 1e-12 and np.max(np.abs(b)) < 1e-12
    u = rng.normal(size=s.X.shape)
    tan, a, b = s.normal_decompose(u)
    rebuilt = tan + a[..., None] * s.n + b[..., None] * s.v
    assert np.max(np.abs(u - rebuilt)) < 1e-10
    assert np.max(np.abs(s.inner(tan, s.n))) < 1e-10 and np.max(np.abs(s.inner(tan, s.v))) < 1e-10


def test_trace_of_scalar_form_and_decomposition(graph_sphere, perturbed_sphere, flrw_sphere):
    for s in (graph_sphere, perturbed_sphere, flrw_sphere):
        for nu in (s.normal_field(s.v), s.nu_H, s.nu_H.boosted(0.4 * s.X[..., 3])):
            tr = s.metric.trace(s.scalar_form(nu))
            H = -s.inner(s.H, nu.vector)
            assert np.max(np.abs(tr - H)) < 1e-8
            # -H_vec = H nu - (tr_S k) nu_perp with tr_S k = -<H_vec, nu_perp>
            pv = nu.perp.vector
            trk = -s.inner(s.H, pv)
            assert np.max(np.abs(-s.H - (H[..., None] * nu.vector - trk[..., None] * pv))) < 1e-8


def test_round_spheres_are_umbilic(unit_sphere, schwarzschild_sphere):
    for s in (unit_sphere, schwarzschild_sphere):
        assert np.max(np.abs(s.traceless_form(s.nu_H))) < 1e-8
    # the t = 0 slice is totally geodesic
    s = unit_sphere
    assert np.max(np.abs(s.scalar_form(s.nu_H.perp))) < 1e-10


def test_spectral_and_analytic_tangents_agree(grid):
    spec = EmbeddingSpec("round", 4.0)
    a = evaluate_surface(spec, grid, Schwarzschild(), tangents="analytic")
    b = evaluate_surface(spec, grid, Schwarzschild(), tangents="spectral")
    assert np.max(np.abs(a.Xi - b.Xi)) < 1e-10
    assert np.max(np.abs(a.HH - b.HH)) < 1e-10


@pytest.mark.parametrize("boost", [0.3, -0.8, 1.5])
def test_frame_boost_covariance(grid, boost):
    spec = EmbeddingSpec("graph", 1.0, 0.0, 0.3, "Y20")
    a = evaluate_surface(spec, grid, Minkowski())
    b = evaluate_surface(spec, grid, Minkowski(), frame_boost=boost)
    assert np.max(np.abs(a.HH - b.HH)) < 1e-10
    assert abs(a.area - b.area) < 1e-10
    assert abs(hawking_mass(a) - hawking_mass(b)) < 1e-10
    assert np.max(np.abs(a.nu_H.vector - b.nu_H.vector)) < 1e-10


def test_errors():
    g = build_grid(16, 32)
    with pytest.raises(ConfigurationError):
        EmbeddingSpec("torus")
    with pytest.raises(ConfigurationError):
        parse_profile("Y25")
    # steep graph: induced metric turns Lorentzian
    with pytest.raises(GeometryError):
        evaluate_surface(EmbeddingSpec("graph", 1.0, 0.0, 3.0, "cos"), g, Minkowski())
    # a surface whose mean curvature vector is timelike somewhere
    with pytest.raises(SpacelikeMeanCurvatureError):
        evaluate_surface(EmbeddingSpec("graph", 1.0, 0.0, 0.2, "P4"), build_grid(32, 64), Minkowski())


def test_profile_grammar():
    g = build_grid(16, 32)
    th, _ = g.mesh
    f = parse_profile("0.5*P2+cos+one")(g)
    assert np.allclose(f, 0.5 * (1.5 * np.cos(th) ** 2 - 0.5) + np.cos(th) + 1)


def test_surface_csv(tmp_path, unit_sphere):
    path = tmp_path / "s.csv"
    unit_sphere.to_csv(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:2] == ["theta", "phi"] and "HH" in header and "X_0" in header
