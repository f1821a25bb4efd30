"""CLI tests: subcommands end to end, exit codes, env-var config defaults."""

from __future__ import annotations

import json

import pytest

from conftest import (
    desk_corners,
    make_plane_file,
    run_cli,
    write_corner_file,
    write_scenario_file,
)
from gesturepoint.cli import load_plane_file
from gesturepoint.geometry import Point3, project, CameraIntrinsics


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


# --- define-plane ------------------------------------------------------------


def test_define_plane_from_3d_corners(tmp_path, capsys):
    corners = write_corner_file(tmp_path / "corners.json", desk_corners())
    out = tmp_path / "plane.json"
    assert run_cli(["define-plane", "--corners", str(corners), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "quaternion" in stdout and "residual" in stdout
    plane, frame, origin_corner, x_corner = load_plane_file(str(out))
    assert plane.normal.z == pytest.approx(1.0)
    assert (origin_corner, x_corner) == (0, 1)
    for c in plane.corners:
        assert abs(plane.signed_distance(c)) <= 0.005


def test_define_plane_pixel_corners_match_3d(tmp_path):
    intr = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)
    corners_3d = [Point3(-0.3, -0.1, 1.0), Point3(0.3, -0.1, 1.0), Point3(0.3, 0.3, 1.0), Point3(-0.3, 0.3, 1.0)]
    px_doc = {
        "intrinsics": {"fx": 600, "fy": 600, "cx": 320, "cy": 240, "width": 640, "height": 480},
        "corners": [
            {"px": project(c, intr)[0], "py": project(c, intr)[1], "depth": c.z} for c in corners_3d
        ],
    }
    px_file = tmp_path / "pixel_corners.json"
    px_file.write_text(json.dumps(px_doc), encoding="utf-8")
    xyz_file = write_corner_file(tmp_path / "xyz_corners.json", corners_3d)
    out_px, out_xyz = tmp_path / "px.json", tmp_path / "xyz.json"
    # pin the viewpoint so both runs share the normal convention
    assert run_cli(["define-plane", "--corners", str(px_file), "--out", str(out_px), "--viewpoint", "0,0,0"]) == 0
    assert run_cli(["define-plane", "--corners", str(xyz_file), "--out", str(out_xyz), "--viewpoint", "0,0,0"]) == 0
    plane_px, _, _, _ = load_plane_file(str(out_px))
    plane_xyz, _, _, _ = load_plane_file(str(out_xyz))
    assert plane_px.d == pytest.approx(plane_xyz.d, abs=1e-9)
    for a, b in zip(plane_px.corners, plane_xyz.corners):
        assert a.x == pytest.approx(b.x, abs=1e-9)
        assert a.y == pytest.approx(b.y, abs=1e-9)
        assert a.z == pytest.approx(b.z, abs=1e-9)


def test_define_plane_collinear_exits_2(tmp_path, capsys):
    corners = write_corner_file(
        tmp_path / "bad.json", [Point3(0, 0, 0), Point3(1, 0, 0), Point3(2, 0, 0)]
    )
    code = run_cli(["define-plane", "--corners", str(corners), "--out", str(tmp_path / "p.json")])
    assert code == 2
    assert "CollinearCorners" in capsys.readouterr().err


def test_define_plane_missing_file_exits_2(tmp_path):
    code = run_cli(["define-plane", "--corners", str(tmp_path / "nope.json"), "--out", str(tmp_path / "p.json")])
    assert code == 2


# --- generate ------------------------------------------------------------------


def test_generate_writes_deterministic_stream(tmp_path):
    scenario = write_scenario_file(tmp_path / "s.cfg", sigma=0.01, seed=5, count=12)
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run_cli(["generate", "--scenario", str(scenario), "--out", str(out1)]) == 0
    assert run_cli(["generate", "--scenario", str(scenario), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert len(read_jsonl(out1)) == 12
    out3 = tmp_path / "c.jsonl"
    assert run_cli(["generate", "--scenario", str(scenario), "--out", str(out3), "--seed", "6"]) == 0
    assert out3.read_bytes() != out1.read_bytes()


def test_generate_bad_scenario_exits_2(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("sigma = 0.1\n", encoding="utf-8")
    assert run_cli(["generate", "--scenario", str(bad), "--out", str(tmp_path / "o.jsonl")]) == 2


# --- replay ------------------------------------------------------------------


def test_replay_noiseless_hits_target(tmp_path, capsys):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", target="0.2, 0.3, 0.0", count=20)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    out = tmp_path / "points.jsonl"
    assert run_cli(["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(out)]) == 0
    records = read_jsonl(out)
    assert len(records) == 20
    for r in records:
        assert r["hand"] == "right"
        assert abs(r["u"] - 0.2) < 1e-9
        assert abs(r["v"] - 0.3) < 1e-9
    summary = capsys.readouterr().err
    assert "frames=20" in summary and "warnings=0" in summary


def test_replay_is_deterministic(tmp_path):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", sigma=0.01, count=30)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    out1, out2 = tmp_path / "p1.jsonl", tmp_path / "p2.jsonl"
    run_cli(["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(out1)])
    run_cli(["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(out2)])
    assert out1.read_bytes() == out2.read_bytes()


def test_replay_absent_wrist_warns_per_frame(tmp_path, capsys):
    plane = make_plane_file(tmp_path / "plane.json")
    stream = tmp_path / "stream.jsonl"
    lines = [
        json.dumps({"t": i / 30, "joints": {"right_shoulder": {"x": 0.3, "y": -0.1, "z": 0.6, "c": 0.9}}})
        for i in range(7)
    ]
    stream.write_text("\n".join(lines) + "\n", encoding="utf-8")
    out = tmp_path / "points.jsonl"
    assert run_cli(["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == ""
    assert "frames=7 points=0 warnings=7" in capsys.readouterr().err


def test_replay_skips_malformed_lines_with_warning(tmp_path, capsys):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", count=6)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    lines = stream.read_text(encoding="utf-8").splitlines()
    lines.insert(3, "{broken json")
    stream.write_text("\n".join(lines) + "\n", encoding="utf-8")
    out = tmp_path / "points.jsonl"
    assert run_cli(["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(out)]) == 0
    err = capsys.readouterr().err
    assert "line 4" in err
    assert "frames=6 points=6 warnings=1" in err


def test_replay_with_snap_logs_selection(tmp_path):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", target="0.2, 0.3, 0.0", count=20)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    registry = tmp_path / "layout.json"
    registry.write_text(
        json.dumps(
            {
                "targets": [
                    {"id": "goal", "label": "goal", "u": 0.2, "v": 0.3},
                    {"id": "decoy", "label": "decoy", "u": 0.5, "v": 0.6},
                ],
                "areas": [],
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "points.jsonl"
    assert run_cli(
        ["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(out),
         "--snap", "pick", "--registry", str(registry)]
    ) == 0
    snaps = [r for r in read_jsonl(out) if "snap" in r]
    assert len(snaps) == 1  # 20 accepted points, one snap at the 15th
    assert snaps[0]["snap"] == {"ok": True, "id": "goal", "fallback": False}


def test_replay_snap_requires_registry(tmp_path):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", count=5)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    code = run_cli(["replay", "--plane", str(plane), "--stream", str(stream),
                    "--out", str(tmp_path / "o.jsonl"), "--snap", "pick"])
    assert code == 2


def test_replay_unwritable_output_exits_1(tmp_path):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", count=5)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    code = run_cli(["replay", "--plane", str(plane), "--stream", str(stream),
                    "--out", str(tmp_path / "missing_dir" / "o.jsonl")])
    assert code == 1


# --- sweep and calibrate --------------------------------------------------------


def test_sweep_noiseless_pick(tmp_path):
    out_dir = tmp_path / "reports"
    code = run_cli(["sweep", "--kind", "pick", "--trials", "2", "--seed", "3",
                    "--distances", "0.10,0.04", "--out", str(out_dir)])
    assert code == 0
    csv_text = (out_dir / "pick_square_report.csv").read_text(encoding="utf-8")
    rows = csv_text.strip().splitlines()
    assert len(rows) == 1 + 2 * 4
    assert all(",100.00," in row for row in rows[1:])
    assert (out_dir / "pick_square_report.json").exists()


def test_sweep_rerun_byte_identical(tmp_path):
    args = ["sweep", "--kind", "place", "--trials", "2", "--seed", "3", "--sizes", "0.20"]
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    assert run_cli(args + ["--out", str(d1)]) == 0
    assert run_cli(args + ["--out", str(d2)]) == 0
    for name in ("place_areas_report.csv", "place_areas_report.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_sweep_invalid_length_list_exits_2(tmp_path):
    assert run_cli(["sweep", "--kind", "pick", "--distances", "0.1,-0.2",
                    "--out", str(tmp_path)]) == 2
    assert run_cli(["sweep", "--kind", "pick", "--distances", "abc",
                    "--out", str(tmp_path)]) == 2
    assert run_cli(["sweep", "--kind", "pick", "--distances", "0.9",
                    "--out", str(tmp_path)]) == 2


def test_sweep_calibrate_echoes_sigma(tmp_path, capsys):
    out_dir = tmp_path / "reports"
    code = run_cli(["sweep", "--kind", "pick", "--trials", "1", "--seed", "3",
                    "--distances", "0.10", "--calibrate", "0.02", "--out", str(out_dir)])
    assert code == 0
    err = capsys.readouterr().err
    assert "sigma_m=" in err
    sigma = float(err.split("sigma_m=")[1].split()[0])
    assert sigma > 0
    doc = json.loads((out_dir / "pick_square_report.json").read_text(encoding="utf-8"))
    assert doc["config"]["sigma_m"] == pytest.approx(sigma, abs=5e-7)


def test_calibrate_zero_target_prints_zero(tmp_path, capsys):
    assert run_cli(["calibrate", "--target-error", "0"]) == 0
    assert capsys.readouterr().out.strip() == "0.000000"


def test_calibrate_unreachable_exits_1(tmp_path):
    code = run_cli(["calibrate", "--target-error", "0.005", "--aim-bias", "0.05",
                    "--samples", "2000"])
    assert code == 1


# --- registry ------------------------------------------------------------------


def test_registry_lifecycle(tmp_path, capsys):
    layout = tmp_path / "layout.json"
    assert run_cli(["registry", "init", "--file", str(layout)]) == 0
    assert run_cli(["registry", "init", "--file", str(layout)]) == 1  # refuses overwrite
    assert run_cli(["registry", "add-target", "--file", str(layout), "--id", "t1",
                    "--label", "bolt", "--group", "big", "--u", "0.2", "--v", "0.3"]) == 0
    assert run_cli(["registry", "add-area", "--file", str(layout), "--id", "a1",
                    "--cu", "0.4", "--cv", "0.5", "--hu", "0.1", "--hv", "0.1"]) == 0
    capsys.readouterr()
    assert run_cli(["registry", "list", "--file", str(layout)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["targets"][0]["id"] == "t1"
    assert doc["areas"][0]["id"] == "a1"
    assert run_cli(["registry", "add-target", "--file", str(layout), "--id", "t1",
                    "--u", "0.0", "--v", "0.0"]) == 1  # duplicate
    assert run_cli(["registry", "remove-target", "--file", str(layout), "--id", "zzz"]) == 1
    assert run_cli(["registry", "remove-target", "--file", str(layout), "--id", "t1"]) == 0
    assert run_cli(["registry", "remove-area", "--file", str(layout), "--id", "a1"]) == 0


def test_registry_missing_flags_exit_2(tmp_path):
    layout = tmp_path / "layout.json"
    run_cli(["registry", "init", "--file", str(layout)])
    assert run_cli(["registry", "add-target", "--file", str(layout), "--id", "t1"]) == 2


def test_registry_malformed_file_exits_2(tmp_path):
    layout = tmp_path / "layout.json"
    layout.write_text("{broken", encoding="utf-8")
    assert run_cli(["registry", "list", "--file", str(layout)]) == 2


# --- env config ------------------------------------------------------------------


def test_env_config_supplies_defaults(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "defaults.cfg"
    cfg.write_text("target_error = 0\n", encoding="utf-8")
    monkeypatch.setenv("GESTURE_POINTER_CONFIG", str(cfg))
    # --target-error is required by argparse, so pass it explicitly but let the
    # env file cover an optional flag instead
    cfg.write_text("samples = 2000\nseed = 4\n", encoding="utf-8")
    assert run_cli(["calibrate", "--target-error", "0"]) == 0
    assert capsys.readouterr().out.strip() == "0.000000"


def test_env_config_flags_override(tmp_path, monkeypatch):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", count=6)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    cfg = tmp_path / "defaults.cfg"
    cfg.write_text(f"plane = {tmp_path / 'nonexistent.json'}\nhand = left\n", encoding="utf-8")
    monkeypatch.setenv("GESTURE_POINTER_CONFIG", str(cfg))
    # the explicit --plane flag wins over the bad env value
    out = tmp_path / "o.jsonl"
    assert run_cli(["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(out)]) == 0
    # without the flag, the env default is used and fails as a config error
    assert run_cli(["replay", "--stream", str(stream), "--out", str(out)]) == 2


def test_env_config_hand_applies(tmp_path, monkeypatch):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", count=6)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    cfg = tmp_path / "defaults.cfg"
    cfg.write_text("hand = left\n", encoding="utf-8")
    monkeypatch.setenv("GESTURE_POINTER_CONFIG", str(cfg))
    out = tmp_path / "o.jsonl"
    assert run_cli(["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == ""  # stream is right-handed, config says left


# --- usage errors ------------------------------------------------------------------


def test_nonpositive_numeric_params_exit_2(tmp_path):
    plane = make_plane_file(tmp_path / "plane.json")
    scenario = write_scenario_file(tmp_path / "s.cfg", count=5)
    stream = tmp_path / "stream.jsonl"
    run_cli(["generate", "--scenario", str(scenario), "--out", str(stream)])
    base = ["replay", "--plane", str(plane), "--stream", str(stream), "--out", str(tmp_path / "o.jsonl")]
    assert run_cli(base + ["--n", "0"]) == 2
    assert run_cli(base + ["--threshold", "-0.01"]) == 2
    assert run_cli(base + ["--min-confidence", "1.5"]) == 2
    assert run_cli(["sweep", "--kind", "pick", "--trials", "0", "--out", str(tmp_path)]) == 2


def test_no_command_prints_usage():
    assert run_cli([]) == 2


def test_unknown_flag_exits_2():
    assert run_cli(["sweep", "--kind", "pick", "--bogus-flag", "1"]) == 2


def test_version_flag():
    assert run_cli(["--version"]) == 0
