"""Command-line front end: ``timeflat <subcommand> --scenario FILE [flags]``.

Exit codes: 0 ok, 1 a check failed or a computation error occurred, 2 usage
or scenario parse error.  Reports are JSON; time series and fields are CSV,
with matching PNG figures, written next to the ``--out`` path.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ScenarioError, TimeflatError
from .scenario import Scenario, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SUBCOMMANDS = ("mass", "variation", "flow", "minimize-frame", "timeflat", "verify-identities", "curve", "suite")


class _Usage(Exception):
    pass


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


class Outputs:
    """Where side files go: next to --out, or nowhere when reporting to stdout."""

    def __init__(self, out):
        self.out = Path(out) if out else None
        self.files = []

    def side(self, suffix):
        if self.out is None:
            return None
        path = self.out.with_name(f"{self.out.stem}_{suffix}")
        self.files.append(str(path))
        return path


# ---------------------------------------------------------------------------
# subcommands: each returns (results dict, passed flag)
# ---------------------------------------------------------------------------


def _need_surface(scn):
    if not scn.embedding:
        raise _Usage(f"scenario {scn.name!r} has no embedding section")
    return scn.make_surface(require_spacelike_H=False)


def cmd_mass(scn, args, outs):
    from .hawking import hawking_mass_forms

    surf = _need_surface(scn)
    m1, m2 = hawking_mass_forms(surf)
    return {"m_H": m1, "m_H_split": m2, "area": surf.area, "min_HH": float(np.min(surf.HH))}, True


def cmd_variation(scn, args, outs):
    from .hawking import gauge_diagnostic, variation_fd, variation_hypersurface, variation_connection

    surf = _need_surface(scn)
    surf.require_spacelike()
    t = variation_connection(surf, scn.beta)
    m = variation_hypersurface(surf, scn.beta)
    f = variation_fd(surf, scn.beta, h=scn.fd_step, family=scn.fd_family)
    d_fd = abs(t["value"] - f["value"])
    d_hyp = abs(t["value"] - m["value"])
    ok = d_fd <= max(1e-5 * abs(f["value"]), 1e-7) and d_hyp <= 1e-6 * (1 + abs(t["value"]))
    return {
        "v_connection": t["value"],
        "v_hypersurface": m["value"],
        "v_fd": f["value"],
        "fd_error_bar": f["error_bar"],
        "fd_family": f["family"],
        "prefactor": t["prefactor"],
        "terms_connection": t["terms"],
        "terms_hypersurface": m["terms"],
        "gauge_diagnostic": gauge_diagnostic(surf, scn.beta),
        "cross_check": {"connection_fd": d_fd, "connection_hypersurface": d_hyp, "agree": ok},
    }, ok


def cmd_flow(scn, args, outs):
    from .hawking import run_flow

    surf = _need_surface(scn)
    surf.require_spacelike()
    state = run_flow(surf, scn.beta, dlam=scn.dlambda, n_steps=scn.steps)
    res = {"summary": state.summary(), "final": state.records[-1]}
    csv_path = outs.side("flow.csv")
    if csv_path:
        from .plotting import plot_flow

        state.to_csv(csv_path)
        plot_flow(state, outs.side("flow.png"))
    return res, True


def cmd_minimize_frame(scn, args, outs):
    from .connection import boost_frame, minimize_frame
    from .sphere import fields_to_csv, random_smooth_field

    surf = _need_surface(scn)
    surf.require_spacelike()
    theta0 = random_smooth_field(surf.grid, 4, scn.seed, amplitude=0.5)
    nu0 = boost_frame(surf.nu_H, theta0)
    nu_star, psi, rep = minimize_frame(surf, nu0)
    csv_path = outs.side("frame.csv")
    if csv_path:
        from .plotting import plot_field

        angle = nu_star.angle
        fields_to_csv(csv_path, surf.grid, theta_start=theta0, theta_correction=psi, angle_to_nu_H=theta0 + psi)
        plot_field(surf.grid, angle, outs.side("frame.png"), label="boost angle of minimizer")
    return {"report": rep.as_dict(), "start_seed": scn.seed}, rep.converged


def cmd_timeflat(scn, args, outs):
    from .connection import connection_form, time_flat_residual
    from .sphere import fields_to_csv

    surf = _need_surface(scn)
    surf.require_spacelike()
    rep = time_flat_residual(surf)
    csv_path = outs.side("divalpha.csv")
    if csv_path:
        from .plotting import plot_field

        div = connection_form(surf, surf.nu_H).divergence
        fields_to_csv(csv_path, surf.grid, div_alpha_H=div)
        plot_field(surf.grid, div, outs.side("divalpha.png"), label=r"div $\alpha_H$")
    return rep.as_dict(), True


def cmd_verify_identities(scn, args, outs):
    from .slices import (
        SliceSurface,
        verify_constraints,
        verify_divergence_split,
        verify_scalar_curvature_split,
        verify_momentum_divergence,
        verify_flow_rates,
        verify_p_equals_alpha,
    )
    from .sphere import real_harmonic

    sl = scn.make_slice()
    p = scn.make_p_field(sl)
    n = int(scn.slice.get("samples", 50))
    grid = scn.make_grid()
    spec = scn.embedding
    radius = float(spec.get("radius", 4.0 if sl.kind == "schwarzschild" else 1.0))
    amp = float(spec.get("amplitude", 0.1))
    Y = radius * grid.unit_normal * (1 + amp * real_harmonic(grid, 2, 1))[..., None]
    surf = SliceSurface(grid, sl, Y)
    reports = [verify_scalar_curvature_split(1000, seed=scn.seed)]
    reports += verify_constraints(sl, n=n, seed=scn.seed)
    reports.append(verify_momentum_divergence(sl, n=n, seed=scn.seed))
    reports.append(verify_divergence_split(surf, p))
    reports.append(verify_p_equals_alpha(surf))
    reports += verify_flow_rates(surf, p, h=scn.fd_step)
    return {"slice": sl.describe(), "reports": [r.as_dict() for r in reports]}, all(r.passed for r in reports)


def cmd_curve(scn, args, outs):
    from .curves import frenet, is_time_flat_curve, named_curve

    if args.curve:
        params = {}
        for item in args.param or []:
            key, eq, val = item.partition("=")
            try:
                if not eq:
                    raise ValueError
                params[key] = int(val) if key == "n" else float(val)
            except ValueError:
                raise _Usage(f"--param expects key=number, got {item!r}") from None
        curve = named_curve(args.curve, **params)
    elif scn is not None and scn.curve:
        curve = scn.make_curve()
    else:
        raise _Usage("curve needs --curve NAME or a scenario with a curve section")
    data = frenet(curve)
    flat = is_time_flat_curve(curve, data)
    csv_path = outs.side("curve.csv")
    if csv_path:
        from .plotting import plot_curve

        data.to_csv(csv_path)
        plot_curve(data, outs.side("curve.png"), title=curve.name)
    return {
        "curve": curve.name,
        "signature": curve.signature,
        "kappa_min": float(data.kappa.min()),
        "kappa_max": float(data.kappa.max()),
        "tau_mean": flat.mean_tau,
        "tau_max_deviation": flat.max_deviation,
        "tau_route_gap": data.route_gap,
        "frame_error": data.frame_error,
        "is_time_flat": flat.is_time_flat,
    }, True


def cmd_suite(scn, args, outs):
    from .acceptance import mass_scan, run_suite

    numbers = [int(v) for v in args.only.split(",")] if args.only else None
    results = run_suite(numbers, jobs=args.jobs, echo=lambda line: print(line, file=sys.stderr, flush=True))
    csv_path = outs.side("mass_scan.csv")
    if csv_path:
        from .plotting import plot_mass_scan

        rows = next((r.details["scan"] for r in results if r.number == 10), None) or mass_scan()
        with open(csv_path, "w") as fh:
            fh.write("eps,m_H,m_oracle\n")
            for r in rows:
                fh.write(f"{r['eps']!r},{r['m_H']!r},{r['m_oracle']!r}\n")
        plot_mass_scan([r["eps"] for r in rows], [r["m_H"] for r in rows], [r["m_oracle"] for r in rows],
                       outs.side("mass_scan.png"))
    passed = all(r.passed for r in results)
    return {"criteria": [r.as_dict() for r in results], "all_passed": passed}, passed


HANDLERS = {
    "mass": cmd_mass,
    "variation": cmd_variation,
    "flow": cmd_flow,
    "minimize-frame": cmd_minimize_frame,
    "timeflat": cmd_timeflat,
    "verify-identities": cmd_verify_identities,
    "curve": cmd_curve,
    "suite": cmd_suite,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="timeflat", description="Hawking mass, time-flat surfaces and their "
                                     "variations on spectral sphere grids.")
    parser.add_argument("--version", action="version", version=f"timeflat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", help="scenario file (key = value)")
        p.add_argument("--out", help="JSON report path; CSV/PNG side files are written next to it")
        p.add_argument("--grid", help="override grid, e.g. 48x96")
        p.add_argument("--seed", type=int)
        p.add_argument("--beta", help="beta policy, e.g. const:0.5 or random:1,4,0.5")
        p.add_argument("--steps", type=int)
        p.add_argument("--dlambda", type=float)
        p.add_argument("--fd-step", type=float)
        if name == "curve":
            p.add_argument("--curve", help="named curve (circle, helix, wobble, ...)")
            p.add_argument("--param", action="append", help="curve parameter override key=value")
        if name == "suite":
            p.add_argument("--only", help="comma-separated criterion numbers")
            p.add_argument("--jobs", type=int, default=1)
    return parser


def _module_of(exc):
    tb, mod = exc.__traceback__, None
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("timeflat.") and name not in ("timeflat.errors", "timeflat.cli"):
            mod = name
        tb = tb.tb_next
    return mod or "timeflat"


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    outs = Outputs(args.out)
    try:
        scn = load_scenario(args.scenario) if args.scenario else None
        if scn is None and args.command not in ("curve", "suite"):
            raise _Usage(f"{args.command} needs --scenario")
        if scn is not None:
            scn = scn.with_overrides(grid=args.grid, seed=args.seed, beta=args.beta, steps=args.steps,
                                     dlambda=args.dlambda, fd_step=args.fd_step)
    except (ScenarioError, _Usage, OSError) as exc:
        print(f"timeflat {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if outs.out:
        # side files land next to the report, so its directory must exist first
        outs.out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        results, passed = HANDLERS[args.command](scn, args, outs)
    except _Usage as exc:
        print(f"timeflat {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TimeflatError, ValueError) as exc:
        print(f"timeflat {args.command}: {_module_of(exc)}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    doc = {
        "tool": "timeflat",
        "version": __version__,
        "command": args.command,
        "scenario": scn.echo() if isinstance(scn, Scenario) else None,
        "results": results,
        "passed": bool(passed),
        "side_files": outs.files,
        "timings": {"wall_seconds": time.perf_counter() - t0},
    }
    text = json.dumps(_clean(doc), indent=2, sort_keys=True)
    if outs.out:
        outs.out.write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
