import io
import json
import contextlib

import pytest

from phonotdoa.cli import main

LABELS = ["IY", "S", "K", "AA", "T", "OW", "N", "EH"]


def run_cli(*args):
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        code = main([str(a) for a in args])
    return code, out.getvalue()


def _scene(tmp_path, name="scene.json", **kwargs):
    doc = {"kind": "live", "labels": LABELS, "seed": 1}
    doc.update(kwargs)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """simulate 3 enrollment trials + 1 live + 1 attack, enroll a profile."""
    tmp = tmp_path_factory.mktemp("cli")
    trials = []
    for seed in (1, 2, 3):
        scene = _scene(tmp, f"s{seed}.json", seed=seed)
        out = tmp / f"t{seed}"
        code, _ = run_cli("simulate", scene, out)
        assert code == 0
        trials.append(f"{out}/recording.wav:{out}/alignment.json")

    live_dir = tmp / "live"
    code, _ = run_cli("simulate", _scene(tmp, "live.json", seed=77), live_dir)
    assert code == 0

    attack_dir = tmp / "attack"
    scene = _scene(
        tmp, "attack.json", kind="static_playback", seed=78, source_offset=[0.0, -0.02]
    )
    code, _ = run_cli("simulate", scene, attack_dir)
    assert code == 0

    profile = tmp / "profile.json"
    args = ["enroll", "--out", profile, "--user", "u1"]
    for t in trials:
        args += ["--trial", t]
    code, _ = run_cli(*args)
    assert code == 0
    return tmp, profile, live_dir, attack_dir


def test_simulate_outputs(pipeline):
    tmp, _, live_dir, _ = pipeline
    assert (live_dir / "recording.wav").exists()
    assert (live_dir / "alignment.json").exists()
    truth = json.loads((live_dir / "ground_truth.json").read_text())
    assert len(truth["phonemes"]) == len(LABELS)


def test_verify_live_accepts(pipeline):
    _, profile, live_dir, _ = pipeline
    code, out = run_cli(
        "verify", live_dir / "recording.wav", live_dir / "alignment.json",
        "--profile", profile,
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "live"
    assert doc["scores"]["combined"] > 0.6


def test_verify_attack_rejects(pipeline):
    _, profile, _, attack_dir = pipeline
    code, out = run_cli(
        "verify", attack_dir / "recording.wav", attack_dir / "alignment.json",
        "--profile", profile,
    )
    assert code == 1
    assert json.loads(out)["verdict"] == "replay"


def test_verify_missing_alignment_exits_2(pipeline, capsys):
    tmp, profile, live_dir, _ = pipeline
    code, _ = run_cli(
        "verify", live_dir / "recording.wav", tmp / "nope.json",
        "--profile", profile,
    )
    assert code == 2
    err = capsys.readouterr().err
    assert "FileNotFoundError" in err


def test_verify_threshold_flag_overrides(pipeline):
    _, profile, live_dir, _ = pipeline
    code, _ = run_cli(
        "verify", live_dir / "recording.wav", live_dir / "alignment.json",
        "--profile", profile, "--threshold", "0.999",
    )
    assert code == 1  # nothing beats an impossible threshold


def test_cli_determinism_verify(pipeline):
    _, profile, live_dir, _ = pipeline
    args = (
        "verify", live_dir / "recording.wav", live_dir / "alignment.json",
        "--profile", profile, "--seed", "9",
    )
    _, out1 = run_cli(*args)
    _, out2 = run_cli(*args)
    assert out1 == out2


def test_cli_determinism_simulate(pipeline, tmp_path):
    tmp, _, _, _ = pipeline
    scene = _scene(tmp_path, "det.json", seed=5)
    _, out1 = run_cli("simulate", scene, tmp_path / "d1")
    _, out2 = run_cli("simulate", scene, tmp_path / "d2")
    b1 = (tmp_path / "d1" / "recording.wav").read_bytes()
    b2 = (tmp_path / "d2" / "recording.wav").read_bytes()
    assert b1 == b2
    a1 = (tmp_path / "d1" / "alignment.json").read_text()
    a2 = (tmp_path / "d2" / "alignment.json").read_text()
    assert a1 == a2


def test_tdoa_csv(pipeline):
    _, _, live_dir, _ = pipeline
    code, out = run_cli(
        "tdoa", live_dir / "recording.wav", live_dir / "alignment.json"
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("label,start,end,delay_samples")
    assert len(lines) == 1 + len(LABELS)
    _, out2 = run_cli("tdoa", live_dir / "recording.wav", live_dir / "alignment.json")
    assert out == out2


def test_pose_subcommand_solves_and_transforms():
    code, out = run_cli(
        "pose", "--tdoa", "62.996", "--sample-rate", "192000", "--delta-x-m", "0.27",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["x_solved"] == pytest.approx(0.03, abs=1e-4)
    assert doc["tdoa2"] == pytest.approx(17.44, abs=0.05)


def test_pose_angle_uses_config_pivot(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"geometry": {"pivot": "top"}}))
    code, out = run_cli(
        "pose", "--tdoa", "62.996", "--angle-deg", "0", "--config", config,
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["tdoa2"] == pytest.approx(62.996, abs=1e-3)
    assert doc["pivot"] == "top"
    # bottom-referenced default does not return the input at angle 0
    code, out = run_cli("pose", "--tdoa", "62.996", "--angle-deg", "0")
    assert abs(json.loads(out)["tdoa2"] - 62.996) > 1.0


def test_simulate_beep_scene(tmp_path):
    scene = tmp_path / "beep.json"
    scene.write_text(json.dumps({"kind": "beep", "face_distance_m": 0.10, "seed": 4}))
    code, out = run_cli("simulate", scene, tmp_path / "beep_out")
    assert code == 0
    truth = json.loads((tmp_path / "beep_out" / "ground_truth.json").read_text())
    assert truth["echo_delay_samples"] == pytest.approx(112.94, abs=0.01)


def test_verify_with_beep_distance(pipeline, tmp_path):
    # estimated handset distance equal to the enrollment pose keeps the
    # templates unchanged, so a live utterance still verifies
    _, profile, live_dir, _ = pipeline
    scene = tmp_path / "beep.json"
    scene.write_text(json.dumps({"kind": "beep", "face_distance_m": 0.10, "seed": 4}))
    run_cli("simulate", scene, tmp_path / "beep_out")
    code, out = run_cli(
        "verify", live_dir / "recording.wav", live_dir / "alignment.json",
        "--profile", profile,
        "--beep-echo", tmp_path / "beep_out" / "recording.wav",
        "--config", _write_top_pivot_config(tmp_path),
    )
    assert code in (0, 1)
    doc = json.loads(out)
    assert "verdict" in doc


def _write_top_pivot_config(tmp_path):
    config = tmp_path / "pivot_top.json"
    config.write_text(json.dumps({"geometry": {"pivot": "top"}}))
    return config


def test_evaluate_command(tmp_path):
    exp = tmp_path / "exp.json"
    exp.write_text(
        json.dumps(
            {
                "seed": 2,
                "users": 1,
                "passphrases_per_user": 1,
                "live_trials": 3,
                "static_attacks": 2,
                "mobile_attacks": 1,
                "length_bands": [[2, 2]],
                "band_weights": [1.0],
                "duration_range": [0.06, 0.08],
            }
        )
    )
    code, out = run_cli("evaluate", exp, tmp_path / "rep")
    assert code == 0
    assert (tmp_path / "rep" / "report.json").exists()
    doc = json.loads(out)
    assert "combined" in doc["methods"]
    # determinism of the whole experiment pipeline: identical invocation
    # twice gives byte-identical stdout and report
    r1 = (tmp_path / "rep" / "report.json").read_bytes()
    code, out2 = run_cli("evaluate", exp, tmp_path / "rep")
    assert out == out2
    r2 = (tmp_path / "rep" / "report.json").read_bytes()
    assert r1 == r2


def test_enroll_text_independent_via_cli(tmp_path, source_model):
    # three long utterances covering the inventory
    labels = sorted(source_model.labels)
    trials = []
    for seed in (11, 12, 13):
        scene = tmp_path / f"ti{seed}.json"
        scene.write_text(
            json.dumps({"kind": "live", "labels": labels, "seed": seed})
        )
        out = tmp_path / f"ti{seed}"
        code, _ = run_cli("simulate", scene, out)
        assert code == 0
        trials.append(f"{out}/recording.wav:{out}/alignment.json")
    profile = tmp_path / "ti.json"
    args = ["enroll", "--out", profile, "--user", "u2", "--mode", "text_independent"]
    for t in trials:
        args += ["--trial", t]
    code, out = run_cli(*args)
    assert code == 0
    assert json.loads(out)["n_phoneme_templates"] == 44
