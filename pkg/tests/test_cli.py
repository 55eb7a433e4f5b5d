import json
import shutil
import subprocess
import sys

import pytest

from dualmind.cli import (
    EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_STATE, EXIT_USAGE, build_parser, execute, main, parse_args,
)
from dualmind.experiments import EXPERIMENTS
from dualmind.model import load_checkpoint, new_model, save_checkpoint

FAST = ["--set", "phase1_epochs=5", "--set", "phase2_epochs=3"]


def test_experiment_args():
    cfg = parse_args(["experiment", "frame", "--seed", "7", "--out", "runs/f7"])
    assert cfg.experiment == "frame" and cfg.seed == 7 and str(cfg.out) == "runs/f7"


def test_unknown_experiment_lists_valid_names(capsys):
    with pytest.raises(SystemExit) as e:
        parse_args(["experiment", "nosuch"])
    assert e.value.code == EXIT_USAGE
    err = capsys.readouterr().err
    assert all(name in err for name in EXPERIMENTS)


@pytest.mark.parametrize("argv", [
    ["train1", "--set", "bogus=1"],
    ["train1", "--set", "lr"],
    ["train1", "--set", "lr=abc"],
    ["train1", "--set", "lr=-1"],
    ["train1", "--set", "hidden_dim=2.5"],
    ["train1", "--bogus-flag"],
    ["experiment"],
    ["train1", "frame"],
    ["all", "--jobs", "0"],
])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as e:
        parse_args(argv)
    assert e.value.code == EXIT_USAGE


def test_overrides_are_typed_and_routed():
    cfg = parse_args(["train1", "--set", "lr=0.05", "--set", "update=trial", "--set", "hidden_dim=8",
                      "--set", "delta_bound=none", "--set", "freeze_meta_in_phase2=true"])
    tc = cfg.train_config()
    assert tc.lr == 0.05 and tc.update == "trial" and tc.dims == {"hidden_dim": 8}
    assert tc.delta_bound is None and tc.freeze_meta_in_phase2 is True


def test_config_file_and_cli_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"lr": 0.2, "phase1_epochs": 3}))
    tc = parse_args(["train1", "--config", str(path), "--set", "lr=0.3"]).train_config()
    assert tc.lr == 0.3 and tc.phase1_epochs == 3


def test_bad_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("[1, 2]")
    with pytest.raises(SystemExit):
        parse_args(["train1", "--config", str(path)])
    with pytest.raises(SystemExit):
        parse_args(["train1", "--config", str(tmp_path / "missing.json")])


def test_help_lists_flags_and_defaults():
    text = build_parser().format_help()
    for flag in ("--seed", "--out", "--config", "--checkpoint-in", "--checkpoint-out", "--set", "--jobs"):
        assert flag in text
    assert text.count("default") >= 7


def test_train1_then_train2(tmp_path):
    out = tmp_path / "run"
    assert main(["train1", "--out", str(out), *FAST]) == EXIT_OK
    ckpt = out / "checkpoint-phase1.json"
    assert load_checkpoint(ckpt).pretrained
    assert main(["train2", "--out", str(out), "--checkpoint-in", str(ckpt), *FAST]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["outputs"]["train2"]["theta_unchanged"]
    assert "checkpoint_in_sha256" in manifest and "finished" in manifest


def test_train2_without_checkpoint_is_a_state_error(tmp_path):
    assert main(["train2", "--out", str(tmp_path)]) == EXIT_STATE
    assert main(["train2", "--out", str(tmp_path), "--checkpoint-in", str(tmp_path / "no.json")]) == EXIT_STATE
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["exit_code"] == EXIT_STATE


def test_train2_on_untrained_checkpoint_is_a_state_error(tmp_path):
    save_checkpoint(new_model(), tmp_path / "raw.json")
    assert main(["train2", "--out", str(tmp_path), "--checkpoint-in", str(tmp_path / "raw.json")]) == EXIT_STATE


def test_nan_loss_is_a_numeric_error(tmp_path):
    model = new_model()
    model.pretrained = True
    model.psi.b2.data[:] = float("nan")
    save_checkpoint(model, tmp_path / "nan.json")
    code = main(["train2", "--out", str(tmp_path / "o"), "--checkpoint-in", str(tmp_path / "nan.json"), *FAST])
    assert code == EXIT_NUMERIC


def test_unwritable_out_is_an_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["train1", "--out", str(blocker / "sub"), *FAST]) == EXIT_IO


def _contents(root):
    """File texts, with the run manifest's timestamps removed."""
    files = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            text = p.read_text()
            if p == root / "manifest.json":
                d = json.loads(text)
                d.pop("started"), d.pop("finished")
                text = json.dumps(d, sort_keys=True)
            files[str(p.relative_to(root))] = text
    return files


def test_same_run_twice_gives_the_same_directory(tmp_path):
    out = tmp_path / "run"
    snapshots = []
    for _ in range(2):
        assert main(["experiment", "frame", "--out", str(out), *FAST]) == EXIT_OK
        snapshots.append(_contents(out))
        shutil.rmtree(out)
    assert "frame/records.csv" in snapshots[0]
    assert snapshots[0] == snapshots[1]


def test_writes_stay_inside_out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["train1", "--out", "inner", *FAST]) == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == ["inner"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dualmind", "experiment", "nosuch"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == EXIT_USAGE and "ablation" in proc.stderr


def test_execute_all_runs_every_stage(tmp_path, monkeypatch):
    calls = []
    import dualmind.cli as cli

    monkeypatch.setattr(cli, "_experiment", lambda cfg, name, outputs: calls.append(name))
    cfg = parse_args(["all", "--seed", "1", "--out", str(tmp_path), *FAST])
    assert execute(cfg) == EXIT_OK
    assert calls == list(EXPERIMENTS)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert {"train1", "train2"} <= set(manifest["outputs"])
    assert (tmp_path / "checkpoint-phase2.json").exists()
