import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timeflat.cli import main
from timeflat.errors import ScenarioError
from timeflat.scenario import load_scenario, parse_grid, parse_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

GOOD = """\
# comment line
name = demo
backend.kind = schwarzschild
backend.mass = 1.0
embedding.family = round
embedding.radius = 4   # trailing comment
grid = 16x32
beta = const:0
flow.steps = 3
outputs = mass, variation
"""


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parse_good_scenario():
    scn = parse_scenario(GOOD)
    assert scn.name == "demo" and scn.grid == (16, 32) and scn.steps == 3
    assert scn.backend == {"kind": "schwarzschild", "mass": 1.0}
    assert scn.outputs == ("mass", "variation")
    assert scn.make_surface().area > 0
    assert scn.fd_family == "line"


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.scn")), ids=lambda p: p.stem)
def test_shipped_scenarios_validate(path):
    scn = load_scenario(path)
    assert scn.source == str(path)


@pytest.mark.parametrize(
    "text,line,column,field",
    [
        ("name = a\nbackend.kind = kerr\n", 2, 16, "backend.kind"),
        ("grid = 32y64\n", 1, 8, "grid"),
        ("embedding.colour = red\n", 1, 1, "embedding.colour"),
        ("name = a\nname = b\n", 2, 1, "name"),
        ("beta =\n", 1, None, "beta"),
        ("  just some words\n", 1, 3, None),
        ("embedding.profile = Y25\n", 1, 21, "embedding.profile"),
        ("flow.steps = -2\n", 1, 14, "flow.steps"),
    ],
)
def test_parse_errors_carry_location(text, line, column, field):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text)
    msg = str(exc.value)
    assert f"line {line}" in msg
    if column is not None:
        assert f"column {column}" in msg
    if field is not None:
        assert field in msg


def test_cross_field_validation():
    with pytest.raises(ScenarioError):
        parse_scenario("grid = 4x8\n")
    with pytest.raises(ScenarioError):
        parse_scenario("slice.kind = graph\nslice.p = banana\n")


def test_parse_grid():
    assert parse_grid("48x96") == (48, 96)
    assert parse_grid(" 8 X 16 ") == (8, 16)
    with pytest.raises(ValueError):
        parse_grid("48")


@settings(max_examples=40, deadline=None)
@given(st.text(alphabet="abcdefxyz._=# 0123456789\n", max_size=60))
def test_parser_never_crashes_unexpectedly(text):
    try:
        parse_scenario(text)
    except ScenarioError:
        pass


def test_mass_command(tmp_path, capsys):
    code, out, _ = run_cli(["mass", "--scenario", str(SCENARIOS / "schwarzschild_sphere.scn"), "--grid", "16x32"],
                           capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == "mass" and doc["passed"]
    assert abs(doc["results"]["m_H"] - 1.0) < 1e-8
    assert doc["scenario"]["grid"] == [16, 32]


def test_cli_is_deterministic(tmp_path, capsys):
    args = ["variation", "--scenario", str(SCENARIOS / "perturbed_minkowski.scn"), "--grid", "16x32",
            "--beta", "random:3,4,0.5", "--seed", "5"]
    _, a, _ = run_cli(args, capsys)
    _, b, _ = run_cli(args, capsys)
    da, db = json.loads(a), json.loads(b)
    da.pop("timings"), db.pop("timings")
    assert da == db


def test_variation_command_reports_cross_check(capsys):
    code, out, _ = run_cli(["variation", "--scenario", str(SCENARIOS / "perturbed_minkowski.scn")], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["results"]["cross_check"]["agree"]
    assert set(doc["results"]["terms_connection"]) >= {"einstein", "traceless", "gradient", "divergence"}


def test_flow_writes_side_files(tmp_path, capsys):
    out = tmp_path / "run.json"
    code, _, _ = run_cli(["flow", "--scenario", str(SCENARIOS / "schwarzschild_sphere.scn"), "--grid", "16x32",
                          "--steps", "3", "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    names = {Path(p).name for p in doc["side_files"]}
    assert {"run_flow.csv", "run_flow.png"} <= names
    for p in doc["side_files"]:
        assert Path(p).stat().st_size > 0
    assert (tmp_path / "run_flow.csv").read_text().startswith("lambda,area")


def test_timeflat_and_minimize_commands(tmp_path, capsys):
    code, out, _ = run_cli(["timeflat", "--scenario", str(SCENARIOS / "graph_sphere.scn"), "--grid", "24x48"],
                           capsys)
    doc = json.loads(out)
    assert code == 0 and doc["results"]["is_time_flat"] is False
    out_path = tmp_path / "frame.json"
    # the minimizer needs the scenario's own 32x64 grid to reach its 1e-8 divergence target
    code, _, _ = run_cli(["minimize-frame", "--scenario", str(SCENARIOS / "graph_sphere.scn"),
                          "--out", str(out_path)], capsys)
    assert code == 0 and json.loads(out_path.read_text())["passed"]


def test_verify_identities_command(capsys):
    code, out, _ = run_cli(["verify-identities", "--scenario", str(SCENARIOS / "graph_slice.scn"),
                            "--grid", "24x48"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    ids = {r["identity"] for r in doc["results"]["reports"]}
    assert {"scalar-curvature-split", "momentum-divergence", "divergence-split", "momentum-connection"} <= ids


def test_curve_command(tmp_path, capsys):
    out = tmp_path / "c.json"
    code, _, _ = run_cli(["curve", "--curve", "helix", "--param", "a=1", "--param", "b=0.5", "--out", str(out)],
                         capsys)
    doc = json.loads(out.read_text())
    assert code == 0
    assert abs(doc["results"]["kappa_min"] - 0.8) < 1e-10
    assert abs(doc["results"]["tau_mean"] - 0.4) < 1e-8
    assert (tmp_path / "c_curve.csv").exists() and (tmp_path / "c_curve.png").exists()


def test_side_files_create_missing_report_directory(tmp_path, capsys):
    out = tmp_path / "runs" / "nested" / "c.json"
    code, _, _ = run_cli(["curve", "--curve", "circle", "--out", str(out)], capsys)
    assert code == 0
    assert out.exists() and (out.parent / "c_curve.csv").exists()


def test_usage_errors(tmp_path, capsys):
    assert run_cli(["mass"], capsys)[0] == 2
    assert run_cli(["bogus"], capsys)[0] == 2
    bad = tmp_path / "bad.scn"
    bad.write_text("backend.kind = kerr\n")
    code, _, err = run_cli(["mass", "--scenario", str(bad)], capsys)
    assert code == 2 and "line 1" in err
    assert run_cli(["curve", "--curve", "circle", "--param", "radius"], capsys)[0] == 2


def test_computation_error_exit_code(tmp_path, capsys):
    scn = tmp_path / "timelike.scn"
    scn.write_text("embedding.family = graph\nembedding.amplitude = 0.2\nembedding.profile = P4\n"
                   "grid = 32x64\n")
    code, _, err = run_cli(["variation", "--scenario", str(scn)], capsys)
    assert code == 1
    assert "timeflat." in err and "SpacelikeMeanCurvatureError" in err


def test_suite_subset(capsys):
    code, out, err = run_cli(["suite", "--only", "1,2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["results"]["all_passed"]
    assert [c["number"] for c in doc["results"]["criteria"]] == [1, 2]
    assert err.count("PASS") == 2
