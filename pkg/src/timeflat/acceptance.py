"""
Acceptance suite: twelve numbered criteria, each with its stated tolerance.

Every criterion function takes a grid ``(n_theta, n_phi)`` and returns a
:class:`CriterionResult`.  ``residuals`` holds the named quantities that the
resolution-convergence criterion compares between 32x64 and 48x96.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .connection import boost_frame, connection_form, functional_C, minimize_frame, time_flat_residual
from .curves import frenet, is_time_flat_curve, named_curve
from .embedding import EmbeddingSpec, evaluate_surface
from .hawking import hawking_mass, run_flow, variation_fd, variation_hypersurface, variation_connection
from .slices import (
    FLRWSlice,
    GraphSlice,
    MinkowskiT0,
    SchwarzschildSlice,
    SliceSurface,
    SymTensorField,
    verify_constraints,
    verify_divergence_split,
    verify_scalar_curvature_split,
    verify_momentum_divergence,
    verify_flow_rates,
    verify_p_equals_alpha,
)
from .spacetimes import make_backend
from .sphere import build_grid, random_smooth_field, real_harmonic

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_suite", "CROSS_CHECK_SCENARIOS"]

BASE_GRID = (32, 64)
FINE_GRID = (48, 96)

# (label, backend kind, backend params, embedding, perturbed?)
CROSS_CHECK_SCENARIOS = [
    ("minkowski-radial-P8", "minkowski", {}, EmbeddingSpec("radial", 1.0, 0.0, 0.1, "Y20+0.1*P8"), True),
    ("minkowski-radial-Y22", "minkowski", {}, EmbeddingSpec("radial", 1.0, 0.0, 0.1, "Y22+0.1*P8"), True),
    ("minkowski-graph-P8", "minkowski", {}, EmbeddingSpec("graph", 1.0, 0.0, 0.1, "Y20+0.1*P8"), True),
    ("minkowski-graph-Y22", "minkowski", {}, EmbeddingSpec("graph", 1.0, 0.0, 0.1, "Y22+0.1*P8"), True),
    ("schwarzschild-round", "schwarzschild", {"mass": 1.0}, EmbeddingSpec("round", 4.0), False),
    ("schwarzschild-radial", "schwarzschild", {"mass": 1.0}, EmbeddingSpec("radial", 4.0, 0.0, 0.1, "Y20+0.05*P7"),
     True),
    ("flrw-comoving", "flrw", {}, EmbeddingSpec("flrw-comoving", 1.0, 1.0), False),
    ("flrw-radial", "flrw", {}, EmbeddingSpec("radial", 1.0, 1.0, 0.1, "Y21+0.05*P8"), True),
]
CROSS_CHECK_BETAS = ("const:0", "random:11,4,0.5")

# roundoff scale below which a residual is treated as converged noise
NOISE_FLOOR = 1e-12
FD_NOISE_FLOOR = 1e-10


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    residuals: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    grid: tuple = BASE_GRID

    def line(self):
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}: {self.summary}"

    def as_dict(self):
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "summary": self.summary,
            "residuals": self.residuals,
            "details": self.details,
            "seconds": self.seconds,
            "grid": list(self.grid),
        }


def _surface(kind, params, spec, grid, **kw):
    return evaluate_surface(spec, build_grid(*grid), make_backend(kind, **params), **kw)


def _unit_sphere(grid):
    return _surface("minkowski", {}, EmbeddingSpec("round", 1.0), grid)


def _schwarzschild_sphere(grid):
    return _surface("schwarzschild", {"mass": 1.0}, EmbeddingSpec("round", 4.0), grid)


def _flrw_sphere(grid):
    return _surface("flrw", {}, EmbeddingSpec("flrw-comoving", 1.0, 1.0), grid)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def criterion_1(grid=BASE_GRID):
    m = hawking_mass(_unit_sphere(grid))
    ok = abs(m) < 1e-10
    return CriterionResult(1, "round-sphere zero mass", ok, f"|m_H| = {abs(m):.2e} (< 1e-10)",
                           {"m_H": abs(m)}, {"m_H": m})


def criterion_2(grid=BASE_GRID):
    m = hawking_mass(_schwarzschild_sphere(grid))
    err = abs(m - 1)
    return CriterionResult(2, "Schwarzschild mass recovery", err < 1e-8, f"|m_H - 1| = {err:.2e} (< 1e-8)",
                           {"m_H-1": err}, {"m_H": m})


CRITERION_3_POLICIES = ("const:0.9", "const:-0.9", "const:0.5", "const:-0.5", "const:0") + tuple(
    f"random:{s},4,0.5" for s in range(1, 6)
)


def criterion_3(grid=BASE_GRID):
    surf = _unit_sphere(grid)
    rows, res = {}, {}
    for pol in CRITERION_3_POLICIES:
        t = variation_connection(surf, pol)["value"]
        m = variation_hypersurface(surf, pol)["value"]
        f = variation_fd(surf, pol)["value"]
        rows[pol] = {"v_connection": t, "v_hypersurface": m, "v_fd": f}
        res[f"{pol}/connection"] = abs(t)
        res[f"{pol}/hypersurface"] = abs(m)
        res[f"{pol}/fd"] = abs(f)
    worst = max(res.values())
    return CriterionResult(3, "first variation vanishes on the round sphere", worst < 1e-8,
                           f"max |v| over {len(rows)} policies x 3 routes = {worst:.2e} (< 1e-8)", res, rows)


def criterion_4(grid=BASE_GRID):
    rows, res, fails = {}, {}, []
    for label, kind, params, spec, _ in CROSS_CHECK_SCENARIOS:
        surf = _surface(kind, params, spec, grid)
        for beta in CROSS_CHECK_BETAS:
            t = variation_connection(surf, beta)["value"]
            m = variation_hypersurface(surf, beta)["value"]
            fd = variation_fd(surf, beta)
            f = fd["value"]
            d_fd, d_hyp = abs(t - f), abs(t - m)
            ok = d_fd <= max(1e-5 * abs(f), 1e-7) and d_hyp <= 1e-6 * (1 + abs(t))
            key = f"{label}/{beta}"
            rows[key] = {"v_connection": t, "v_hypersurface": m, "v_fd": f, "fd_error_bar": fd["error_bar"], "ok": ok}
            res[f"{key}/fd"] = d_fd
            res[f"{key}/hypersurface"] = d_hyp
            if not ok:
                fails.append(key)
    worst_fd = max(v for k, v in res.items() if k.endswith("/fd"))
    worst_hyp = max(v for k, v in res.items() if k.endswith("/hypersurface"))
    summary = (f"{len(rows)} runs, max |connection-fd| = {worst_fd:.1e}, max |connection-hypersurface| = {worst_hyp:.1e}"
               + (f", failing: {', '.join(fails)}" if fails else ""))
    return CriterionResult(4, "triple cross-check", not fails, summary, res, rows)


def criterion_5(grid=BASE_GRID):
    surfaces = {"minkowski": _unit_sphere(grid), "schwarzschild": _schwarzschild_sphere(grid),
                "flrw": _flrw_sphere(grid)}
    rows, worst, fails = {}, np.inf, []
    for name, surf in surfaces.items():
        tf = time_flat_residual(surf)
        if not tf.is_time_flat:
            fails.append(f"{name} not time flat")
            continue
        vals = [variation_connection(surf, f"random:{100 + s},4,0.9")["value"] for s in range(20)]
        rows[name] = {"min_v_connection": min(vals), "tf_r_abs": tf.r_abs}
        worst = min(worst, min(vals))
        if min(vals) < -1e-9:
            fails.append(name)
    return CriterionResult(5, "monotonicity on time-flat spheres", not fails,
                           f"min v_connection over 3 x 20 policies = {worst:.2e} (>= -1e-9)", {}, rows)


def _frame_surfaces(grid):
    return {
        "graph-Y20": _surface("minkowski", {}, EmbeddingSpec("graph", 1.0, 0.0, 0.3, "Y20"), grid),
        "radial-Y22": _surface("minkowski", {}, EmbeddingSpec("radial", 1.0, 0.0, 0.1, "Y22+0.5*Y31"), grid),
        "schwarzschild-radial": _surface("schwarzschild", {"mass": 1.0},
                                         EmbeddingSpec("radial", 4.0, 0.0, 0.05, "Y21"), grid),
    }


def criterion_6(grid=BASE_GRID):
    rows, fails = {}, []
    for name, surf in _frame_surfaces(grid).items():
        angles, worst_div, worst_drop = [], 0.0, -np.inf
        for k in range(5):
            theta0 = random_smooth_field(surf.grid, 4, 200 + k, amplitude=0.5)
            nu0 = boost_frame(surf.nu_H, theta0)
            _, psi, rep = minimize_frame(surf, nu0)
            angles.append(theta0 + psi)
            worst_div = max(worst_div, rep.div_l2 / (1 + rep.alpha_l2))
            worst_drop = max(worst_drop, (rep.C_final - rep.C_initial) / max(1.0, rep.C_initial))
        spread = max(float(np.std(a - b)) for i, a in enumerate(angles) for b in angles[i + 1:])
        ok = worst_div < 1e-8 and worst_drop <= 1e-12 and spread < 1e-8
        rows[name] = {"div_rel": worst_div, "C_increase": worst_drop, "angle_std": spread, "ok": ok}
        if not ok:
            fails.append(name)
    worst = {k: max(r[k] for r in rows.values()) for k in ("div_rel", "angle_std")}
    return CriterionResult(6, "frame minimizer", not fails,
                           f"max ||div a||/(1+||a||) = {worst['div_rel']:.1e}, "
                           f"max angle std = {worst['angle_std']:.1e}", {}, rows)


def criterion_7(grid=BASE_GRID):
    rows, worst = {}, 0.0
    for name, surf in _frame_surfaces(grid).items():
        err = 0.0
        for k in range(20):
            nu = boost_frame(surf.nu_H, random_smooth_field(surf.grid, 4, 300 + k, amplitude=0.3))
            theta = random_smooth_field(surf.grid, 4, 400 + k, amplitude=0.3)
            a = connection_form(surf, nu).alpha
            abar = connection_form(surf, boost_frame(nu, theta)).alpha
            err = max(err, float(np.max(np.abs(abar - (a - surf.metric.d(theta))))))
        rows[name] = err
        worst = max(worst, err)
    return CriterionResult(7, "gauge law", worst < 1e-8, f"max |a_bar - (a - d theta)| = {worst:.1e} (< 1e-8)",
                           {}, rows)


def _slice_cases(grid):
    g = build_grid(*grid)
    wobble = 1 + 0.1 * real_harmonic(g, 2, 1)
    return [
        (MinkowskiT0(), 1.0 * g.unit_normal * wobble[..., None]),
        (SchwarzschildSlice(1.0), 4.0 * g.unit_normal * wobble[..., None]),
        (FLRWSlice(1.0), 1.0 * g.unit_normal * wobble[..., None]),
        (GraphSlice(np.diag([0.1, -0.1, 0.0])), 1.0 * g.unit_normal * wobble[..., None]),
        (GraphSlice([[0.05, 0.02, 0.0], [0.02, -0.03, 0.01], [0.0, 0.01, 0.04]], [0.1, 0.0, 0.05]),
         1.0 * g.unit_normal * wobble[..., None]),
    ], g


def criterion_8(grid=BASE_GRID):
    reports = [verify_scalar_curvature_split(1000, seed=0)]
    cases, g = _slice_cases(grid)
    rng = np.random.default_rng(5)
    p_fields = [
        SymTensorField.constant(np.diag([1.0, 2.0, 3.0])),
        SymTensorField.linear(np.eye(3), 0.1 * rng.normal(size=(3, 3, 3))),
        SymTensorField.radial(0.5, 0.3),
    ]
    for sl, Y in cases:
        reports += verify_constraints(sl)
        reports.append(verify_momentum_divergence(sl))
        surf = SliceSurface(g, sl, Y)
        for p in p_fields + [SymTensorField.momentum_of(sl)]:
            reports.append(verify_divergence_split(surf, p))
        reports.append(verify_p_equals_alpha(surf))
        reports += verify_flow_rates(surf, p_fields[2])
    round_surf = SliceSurface(g, MinkowskiT0(), 2.0 * g.unit_normal)
    for r in verify_flow_rates(round_surf, p_fields[0], threshold=1e-8):
        r.inputs = "round sphere r = 2 (closed form)"
        reports.append(r)
    fails = [f"{r.identity} [{r.inputs}] {r.max_residual:.1e}" for r in reports if not r.passed]
    worst = {}
    for r in reports:
        worst[r.identity] = max(worst.get(r.identity, 0.0), r.max_residual)
    summary = ", ".join(f"{k} {v:.0e}" for k, v in worst.items())
    if fails:
        summary += "; failing: " + "; ".join(fails)
    return CriterionResult(8, "slice identities", not fails, summary, {},
                           {"reports": [r.as_dict() for r in reports]})


def criterion_9(grid=BASE_GRID):
    state = run_flow(_schwarzschild_sphere(grid), "const:0", dlam=0.01, n_steps=100, timeflat=False)
    m_err = float(np.max(np.abs(state.column("m_H") - 1)))
    a_err = float(np.max(state.column("area_rel_err")))
    lam = float(state.column("lambda")[-1])
    ok = m_err < 1e-6 and a_err < 1e-4 and abs(lam - 1) < 1e-9 and state.halted is None
    return CriterionResult(9, "inverse mean curvature flow conservation", ok,
                           f"lambda to {lam:g}: max |m_H - 1| = {m_err:.1e} (< 1e-6), "
                           f"max area drift = {a_err:.1e} (< 1e-4)", {}, state.summary())


SCAN_EPS = (0.1, 0.2, 0.3, 0.4, 0.5)


def mass_scan(grid=BASE_GRID):
    from .oracle import graph_sphere_mass

    g = build_grid(*grid)
    rows = []
    for eps in SCAN_EPS:
        surf = evaluate_surface(EmbeddingSpec("graph", 1.0, 0.0, eps, "P2"), g, make_backend("minkowski"),
                                require_spacelike_H=False)
        rows.append({"eps": eps, "m_H": hawking_mass(surf), "m_oracle": graph_sphere_mass(eps)})
    return rows


def criterion_10(grid=BASE_GRID):
    rows = mass_scan(grid)
    diffs = [abs(r["m_H"] - r["m_oracle"]) for r in rows]
    signs = all(np.sign(r["m_H"]) == np.sign(r["m_oracle"]) for r in rows)
    positive = [r["eps"] for r in rows if r["m_H"] > 0]
    ok = signs and max(diffs) < 1e-6
    return CriterionResult(10, "graph-sphere mass scan", ok,
                           f"max |pipeline - oracle| = {max(diffs):.1e} (< 1e-6), signs agree: {signs}; "
                           f"positive m_H at eps = {positive}", {}, {"scan": rows, "positivity": bool(positive)})


def criterion_11(grid=BASE_GRID):
    checks = {}
    circ = frenet(named_curve("circle"))
    checks["circle tau"] = (float(np.max(np.abs(circ.tau))), 1e-10)
    hel = frenet(named_curve("helix", a=1.0, b=0.5))
    checks["helix kappa"] = (float(np.max(np.abs(hel.kappa - 0.8))), 1e-8)
    checks["helix tau"] = (float(np.max(np.abs(hel.tau - 0.4))), 1e-8)
    flat = {n: is_time_flat_curve(named_curve(n)).is_time_flat
            for n in ("circle", "ellipse", "tilted-ellipse", "minkowski-circle", "minkowski-tilted")}
    wob = {n: is_time_flat_curve(named_curve(n)).is_time_flat for n in ("wobble", "minkowski-wobble")}
    ok = all(v < tol for v, tol in checks.values()) and all(flat.values()) and not any(wob.values())
    summary = ", ".join(f"{k} err {v:.0e}" for k, (v, _) in checks.items())
    summary += f"; planar time flat: {all(flat.values())}; wobbled flagged: {not any(wob.values())}"
    return CriterionResult(11, "curve torsion", ok, summary, {},
                           {"checks": {k: v for k, (v, _) in checks.items()}, "planar": flat, "wobbled": wob})


def criterion_12(grid=FINE_GRID, base=None):
    """Re-run criteria 1-4 on ``grid`` and compare residuals with ``base`` (32x64 results)."""
    base = base or {n: CRITERIA[n](BASE_GRID) for n in (1, 2, 3, 4)}
    fine = {n: CRITERIA[n](grid) for n in (1, 2, 3, 4)}
    worse, gains, rows = [], [], {}
    for n in (1, 2, 3, 4):
        for key, r0 in base[n].residuals.items():
            r1 = fine[n].residuals[key]
            floor = FD_NOISE_FLOOR if key.endswith("/fd") else NOISE_FLOOR
            rows[f"{n}:{key}"] = {"coarse": r0, "fine": r1}
            if r1 > 2 * max(r0, floor):
                worse.append(f"{n}:{key} {r0:.1e}->{r1:.1e}")
    perturbed = {lab for lab, *_, p in CROSS_CHECK_SCENARIOS if p}
    for lab in sorted(perturbed):
        for beta in CROSS_CHECK_BETAS:
            key = f"{lab}/{beta}"
            r0 = max(base[4].residuals[f"{key}/fd"], base[4].residuals[f"{key}/hypersurface"])
            r1 = max(fine[4].residuals[f"{key}/fd"], fine[4].residuals[f"{key}/hypersurface"])
            ratio = r0 / max(r1, 1e-300)
            gains.append((key, ratio))
    weak = [f"{k} x{r:.1f}" for k, r in gains if r < 10]
    ok = not worse and not weak and all(fine[n].passed for n in (1, 2, 3, 4))
    summary = (f"{grid[0]}x{grid[1]}: criteria 1-4 {'pass' if all(fine[n].passed for n in fine) else 'FAIL'}, "
               f"min perturbed improvement x{min(r for _, r in gains):.0f} (>= 10)")
    if worse:
        summary += "; worsened: " + "; ".join(worse)
    if weak:
        summary += "; weak: " + "; ".join(weak)
    return CriterionResult(12, "resolution convergence", ok, summary, {},
                           {"residuals": rows, "improvement": dict(gains),
                            "fine_passed": {n: fine[n].passed for n in fine}}, grid=grid)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}


def run_criterion(number, grid=None, cache=None):
    """Run one criterion, timing it.  ``cache`` shares 32x64 results of 1-4 with criterion 12."""
    t0 = time.perf_counter()
    if number == 12:
        base = None
        if cache is not None and all(n in cache for n in (1, 2, 3, 4)):
            base = {n: cache[n] for n in (1, 2, 3, 4)}
        res = criterion_12(grid or FINE_GRID, base=base)
    else:
        res = CRITERIA[number](grid or BASE_GRID)
    res.seconds = time.perf_counter() - t0
    if cache is not None:
        cache[number] = res
    return res


def _run_one(number):
    return run_criterion(number)


def run_suite(numbers=None, jobs=1, echo=None):
    """Run the criteria in order (or in a process pool when ``jobs > 1``)."""
    numbers = sorted(numbers or CRITERIA)
    cache, results = {}, []
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        first = [n for n in numbers if n != 12]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_run_one, first):
                cache[res.number] = res
                results.append(res)
                if echo:
                    echo(res.line())
        if 12 in numbers:
            res = run_criterion(12, cache=cache)
            results.append(res)
            if echo:
                echo(res.line())
        return results
    for n in numbers:
        res = run_criterion(n, cache=cache)
        results.append(res)
        if echo:
            echo(res.line())
    return results
