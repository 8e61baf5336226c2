import json
import subprocess
import sys
from pathlib import Path

import pytest

from afftalk.cli import main


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """A small trained pipeline shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    assert (
        main(
            [
                "simulate",
                "--out",
                str(root / "dataset"),
                "--trials",
                "2500",
                "--trajectories-per-action",
                "12",
                "--seed",
                "42",
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train-bn",
                "--dataset",
                str(root / "dataset"),
                "--out",
                str(root / "models/bn.txt"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train-hmm",
                "--dataset",
                str(root / "dataset"),
                "--out",
                str(root / "models/hmm.txt"),
                "--per-action",
                "12",
                "--seed",
                "7",
            ]
        )
        == 0
    )
    return root


def _somewhere_with_traj(root: Path) -> str:
    return str(sorted((root / "dataset" / "traj").glob("*.csv"))[0])


def test_simulate_layout(pipeline_dir):
    assert (pipeline_dir / "dataset" / "trials.txt").exists()
    assert len(list((pipeline_dir / "dataset" / "traj").glob("*.csv"))) == 36


def test_infer_writes_csv_with_labels(pipeline_dir, capsys):
    out = pipeline_dir / "out" / "infer.csv"
    code = main(
        [
            "infer",
            "--bn",
            str(pipeline_dir / "models/bn.txt"),
            "--infer",
            "Action",
            "--ev",
            "Size=small,Shape=sphere,ObjVel=slow",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "Action,p"
    assert [line.split(",")[0] for line in lines[1:]] == ["grasp", "tap", "touch"]
    total = sum(float(line.split(",")[1]) for line in lines[1:])
    assert abs(total - 1.0) < 1e-9


def test_infer_with_gesture_evidence(pipeline_dir, capsys):
    code = main(
        [
            "infer",
            "--bn",
            str(pipeline_dir / "models/bn.txt"),
            "--bank",
            str(pipeline_dir / "models/hmm.txt"),
            "--traj",
            _somewhere_with_traj(pipeline_dir),
            "--infer",
            "ObjVel",
        ]
    )
    assert code == 0
    assert "consistency" in capsys.readouterr().out


def test_describe_conjunction_contrast(pipeline_dir, capsys):
    for objvel, conj in (("medium", "and"), ("slow", "but")):
        code = main(
            [
                "describe",
                "--bn",
                str(pipeline_dir / "models/bn.txt"),
                "--ev",
                f"Action=grasp,ObjVel={objvel}",
                "--n",
                "3000",
                "--k",
                "10",
                "--seed",
                "5",
            ]
        )
        assert code == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        assert len(lines) == 10
        assert f" {conj} " in lines[0]


def test_describe_with_unknown_variable_names_it(pipeline_dir, capsys):
    code = main(
        [
            "describe",
            "--bn",
            str(pipeline_dir / "models/bn.txt"),
            "--ev",
            "Sizee=big",
        ]
    )
    assert code == 4
    assert "Sizee" in capsys.readouterr().err


def test_anticipate_csv(pipeline_dir):
    out = pipeline_dir / "out" / "anticipate.csv"
    code = main(
        [
            "anticipate",
            "--bn",
            str(pipeline_dir / "models/bn.txt"),
            "--bank",
            str(pipeline_dir / "models/hmm.txt"),
            "--traj",
            _somewhere_with_traj(pipeline_dir),
            "--ev",
            "Shape=sphere",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "t"
    assert "post_tap" in header and "ObjVel=fast" in header
    assert len(lines) - 1 >= 20  # one row per frame


def test_sweep_csv(pipeline_dir):
    out = pipeline_dir / "out" / "sweep.csv"
    code = main(
        [
            "sweep",
            "--bn",
            str(pipeline_dir / "models/bn.txt"),
            "--target",
            "tap",
            "--ev",
            "Size=small,Shape=sphere,ObjVel=slow",
            "--points",
            "25",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "confidence,Action=grasp,Action=tap,Action=touch"
    assert len(lines) == 26


def test_missing_model_file_exit_code(pipeline_dir, capsys):
    code = main(["infer", "--bn", str(pipeline_dir / "nope.txt"), "--infer", "Action"])
    assert code == 3


def test_impossible_evidence_exit_code(pipeline_dir, tmp_path, capsys):
    # alpha=0 leaves genuinely-impossible rows at zero probability
    code = main(
        [
            "train-bn",
            "--dataset",
            str(pipeline_dir / "dataset"),
            "--out",
            str(tmp_path / "mle.txt"),
            "--alpha",
            "0",
        ]
    )
    if code != 0:  # an unobserved parent configuration is also acceptable
        assert code == 4
        return
    code = main(
        [
            "infer",
            "--bn",
            str(tmp_path / "mle.txt"),
            "--infer",
            "Action",
            "--ev",
            "Action=grasp",  # grasp never yields fast in the generator
        ]
    )
    assert code in (0, 5)


def test_config_file_controls_defaults(pipeline_dir, tmp_path, capsys):
    config = {"version": 1, "keep": 3, "n_candidates": 500, "seed": 9}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    code = main(
        [
            "--config",
            str(path),
            "describe",
            "--bn",
            str(pipeline_dir / "models/bn.txt"),
            "--ev",
            "Action=tap,ObjVel=fast",
        ]
    )
    assert code == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    assert len(lines) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"keepp": 3}))
    code = main(
        ["--config", str(bad), "describe", "--bn", str(pipeline_dir / "models/bn.txt")]
    )
    assert code == 4
    assert "keepp" in capsys.readouterr().err


def test_console_entry_point_runs():
    out = subprocess.run(
        [sys.executable, "-m", "afftalk.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    for sub in ("simulate", "train-bn", "train-hmm", "infer", "anticipate", "describe", "sweep"):
        assert sub in out.stdout
