import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from timeflat.errors import DomainError
from timeflat.spacetimes import (
    FLRW,
    Minkowski,
    Schwarzschild,
    SchwarzschildPolar,
    dec_sample_check,
    einstein_divergence,
    make_backend,
)

EVENT_R4 = np.array([0.0, 4.0, 0.0, 0.0])


def test_minkowski_metric_is_flat():
    g = Minkowski().metric(np.array([[0.3, 1.0, -2.0, 0.5]]))
    assert np.array_equal(g[0], np.diag([-1.0, 1.0, 1.0, 1.0]))
    assert np.all(Minkowski().christoffel(EVENT_R4) == 0)
    assert np.all(Minkowski().einstein(EVENT_R4) == 0)


def test_schwarzschild_metric_at_r4():
    g = Schwarzschild(mass=1.0).metric(EVENT_R4)
    assert g[0, 0] == pytest.approx(-0.5, abs=1e-15)
    # x is radial at this event
    assert g[1, 1] == pytest.approx(2.0, abs=1e-15)
    assert g[2, 2] == pytest.approx(1.0, abs=1e-15)


def _sympy_christoffel_r_tt(m, r):
    """Independent oracle: Gamma^r_tt from the polar line element."""
    t, R, th, ph = sp.symbols("t r theta phi")
    f = 1 - 2 * m / R
    g = sp.diag(-f, 1 / f, R**2, R**2 * sp.sin(th) ** 2)
    x = (t, R, th, ph)
    ginv = g.inv()
    gam = sum(ginv[1, d] * (2 * sp.diff(g[d, 0], x[0]) - sp.diff(g[0, 0], x[d])) for d in range(4)) / 2
    return float(gam.subs({R: r, th: 1.0}))


def test_schwarzschild_christoffel_matches_symbolic_oracle():
    gam = Schwarzschild(mass=1.0).christoffel(EVENT_R4)
    oracle = _sympy_christoffel_r_tt(1, 4)
    assert oracle == pytest.approx(0.03125, abs=1e-15)
    assert gam[1, 0, 0] == pytest.approx(0.03125, abs=1e-14)
    polar = SchwarzschildPolar(mass=1.0).christoffel(np.array([0.0, 4.0, 1.0, 0.3]))
    assert polar[1, 0, 0] == pytest.approx(0.03125, abs=1e-14)


def test_christoffel_symmetric_in_lower_indices(rng):
    x = np.column_stack([np.zeros(5), rng.uniform(3, 6, (5, 3))])
    gam = Schwarzschild().christoffel(x)
    assert np.max(np.abs(gam - np.swapaxes(gam, -1, -2))) < 1e-15


def test_fd_mode_matches_analytic_on_schwarzschild(rng):
    x = np.column_stack([np.zeros(10), rng.uniform(3, 6, (10, 3))])
    a = Schwarzschild(mode="analytic").christoffel(x)
    f = Schwarzschild(mode="fd").christoffel(x)
    assert np.max(np.abs(a - f)) < 1e-8


def test_schwarzschild_is_vacuum_in_fd_mode():
    G = Schwarzschild(mode="fd").einstein(EVENT_R4)
    assert np.max(np.abs(G)) < 1e-6
    assert np.max(np.abs(Schwarzschild().einstein(EVENT_R4))) < 1e-12


def test_flrw_dust():
    b = FLRW(q=2.0 / 3.0)
    x = np.array([1.0, 0.3, -0.2, 0.5])
    assert np.allclose(b.metric(x), np.diag([-1.0, 1.0, 1.0, 1.0]), atol=1e-15)
    G = b.einstein(x)
    # Friedmann: G_tt = 3 (a'/a)^2 = 3 (2/3)^2
    assert G[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-12)
    # dust: no pressure
    assert np.max(np.abs(G[1:, 1:])) < 1e-12


def test_admissibility_errors():
    with pytest.raises(DomainError):
        Schwarzschild(mass=1.0).metric(np.array([0.0, 1.5, 0.0, 0.0]))
    with pytest.raises(DomainError):
        FLRW().metric(np.array([0.05, 1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        make_backend("kerr")


def test_dominant_energy_samples():
    ok, worst = dec_sample_check(Minkowski(), np.array([1.0, 0.2, 0.1, 0.0]), rng=0)
    assert ok and worst == 0.0
    ok, worst = dec_sample_check(FLRW(), np.array([1.0, 0.2, 0.1, 0.0]), rng=0)
    assert ok and worst > 0
    ok, worst = dec_sample_check(Schwarzschild(), EVENT_R4, rng=0)
    assert ok and abs(worst) < 1e-12


def test_contracted_bianchi(rng):
    for backend, lo, hi in [(Schwarzschild(), 3, 6), (FLRW(), 0.5, 2)]:
        x = np.column_stack([rng.uniform(1, 2, 20), rng.uniform(lo, hi, (20, 3)) / np.sqrt(3)])
        if backend.kind == "schwarzschild":
            x[:, 1:] *= 4 / np.linalg.norm(x[:, 1:], axis=1, keepdims=True)
        assert np.max(np.abs(einstein_divergence(backend, x))) < 1e-4


@settings(max_examples=25, deadline=None)
@given(st.floats(3.0, 20.0), st.floats(0.0, np.pi), st.floats(0.0, 2 * np.pi), st.floats(0.2, 3.0))
def test_schwarzschild_metric_symmetric_and_lorentzian(r, th, ph, m):
    r = r * m
    x = np.array([0.0, r * np.sin(th) * np.cos(ph), r * np.sin(th) * np.sin(ph), r * np.cos(th)])
    g = Schwarzschild(mass=m).metric(x)
    assert np.allclose(g, g.T)
    ev = np.linalg.eigvalsh(g)
    assert (ev < 0).sum() == 1


def test_einstein_modes_agree_on_sampled_events(rng):
    x = np.column_stack([np.zeros(20), rng.normal(size=(20, 3))])
    x[:, 1:] *= rng.uniform(3, 8, (20, 1)) / np.linalg.norm(x[:, 1:], axis=1, keepdims=True)
    a, f = Schwarzschild(mode="analytic"), Schwarzschild(mode="fd")
    assert np.max(np.abs(a.christoffel(x) - f.christoffel(x))) < 1e-6
    assert np.max(np.abs(a.einstein(x) - f.einstein(x))) < 1e-6
    G = f.einstein(x)
    assert np.max(np.abs(G - np.swapaxes(G, -1, -2))) < 1e-12
