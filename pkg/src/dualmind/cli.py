"""Command-line entry point: training phases, experiments and run manifests."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .experiments import EVIDENCE_CONFIG, EXPERIMENTS, emit_report, run_experiment
from .model import load_checkpoint, save_checkpoint
from .scenario import build_graph, make_curriculum
from .tensor import NumericError, StateError
from .training import TrainConfig, pretrain_system1, train_system2

log = logging.getLogger("dualmind")

COMMANDS = ("train1", "train2", "experiment", "all")
EXIT_OK, EXIT_USAGE, EXIT_STATE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5
DIMS_KEYS = ("hidden_dim", "meta_dim", "head_hidden")
# keys the CLI manages itself
RESERVED_KEYS = ("seed", "dims")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    experiment: str | None = None
    seed: int = 0
    out: Path = Path("runs")
    checkpoint_in: Path | None = None
    checkpoint_out: Path | None = None
    overrides: dict = field(default_factory=dict)
    jobs: int = 1

    def train_config(self, base: TrainConfig | None = None) -> TrainConfig:
        return apply_overrides(base or TrainConfig(), self.overrides, self.seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("out", "checkpoint_in", "checkpoint_out"):
            d[k] = None if d[k] is None else str(d[k])
        return d


# ---------------------------------------------------------------- parsing

TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig) if f.name not in RESERVED_KEYS}


def _coerce(key: str, raw):
    """Parse an override against the type of the field's default."""
    if key in DIMS_KEYS:
        value = json.loads(raw) if isinstance(raw, str) else raw
        if not isinstance(value, int) or isinstance(value, bool):
            raise UsageError(f"{key} must be an integer, got {raw!r}")
        return value
    default = TRAIN_FIELDS[key].default
    if isinstance(raw, str):
        if raw.lower() in ("none", "null") and default is None:
            return None
        if isinstance(default, str):
            return raw
        try:
            raw = json.loads(raw.lower() if isinstance(default, bool) else raw)
        except json.JSONDecodeError:
            raise UsageError(f"cannot parse {key}={raw!r}") from None
    if default is None:
        if raw is not None and not isinstance(raw, (int, float)):
            raise UsageError(f"{key} must be a number or none")
        return None if raw is None else float(raw)
    if isinstance(default, bool):
        if not isinstance(raw, bool):
            raise UsageError(f"{key} must be true or false")
        return raw
    if isinstance(default, int):
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise UsageError(f"{key} must be an integer")
        return raw
    if isinstance(default, float):
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            raise UsageError(f"{key} must be a number")
        return float(raw)
    return raw


def parse_overrides(pairs, base: dict | None = None) -> dict:
    out = dict(base or {})
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        out[key.strip()] = raw
    unknown = sorted(k for k in out if k not in TRAIN_FIELDS and k not in DIMS_KEYS)
    if unknown:
        valid = sorted([*TRAIN_FIELDS, *DIMS_KEYS])
        raise UsageError(f"unknown override key(s) {unknown}; valid keys: {valid}")
    return {k: _coerce(k, v) for k, v in out.items()}


def apply_overrides(base: TrainConfig, overrides: dict, seed: int) -> TrainConfig:
    dims = {k: v for k, v in overrides.items() if k in DIMS_KEYS}
    rest = {k: v for k, v in overrides.items() if k not in DIMS_KEYS}
    try:
        return replace(base, seed=seed, dims={**base.dims, **dims}, **rest)
    except ValueError as e:
        raise UsageError(str(e)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dualmind",
        description="Train the dual-process model and run its experiments.",
        epilog=(
            "commands: train1 (System 1 pretraining), train2 (controller and gate), "
            f"experiment NAME (one of {', '.join(EXPERIMENTS)}), all (train1, train2, then every "
            "experiment in that order). Variants: full, no-meta, meta-only, controller-only; "
            "system2-disabled (alias system1-only) and system2-only fix the gate at 0 or 1. "
            "Exit codes: 0 ok, 2 usage, 3 state, 4 numeric failure, 5 I/O."
        ),
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("experiment", nargs="?", help="experiment name for the 'experiment' command")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    p.add_argument("--out", type=Path, default=Path("runs"), help="output directory (default: runs)")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file of overrides with the same keys as --set (default: none)")
    p.add_argument("--checkpoint-in", type=Path, default=None,
                   help="checkpoint to continue from; train2 needs one (default: none)")
    p.add_argument("--checkpoint-out", type=Path, default=None,
                   help="where to write the trained checkpoint (default: inside --out)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a TrainConfig or DimsConfig field; repeatable (default: none)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for folds and seeds (default: 1)")
    return p


def parse_args(argv=None) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "experiment":
            if ns.experiment not in EXPERIMENTS:
                raise UsageError(f"unknown experiment {ns.experiment!r}; valid: {', '.join(EXPERIMENTS)}")
        elif ns.experiment is not None:
            raise UsageError(f"{ns.command} takes no experiment name")
        if ns.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        base = {}
        if ns.config is not None:
            try:
                base = json.loads(ns.config.read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise UsageError(f"cannot read config {ns.config}: {e}") from None
            if not isinstance(base, dict):
                raise UsageError("config file must hold a JSON object")
        overrides = parse_overrides(ns.overrides, base)
        cfg = RunConfig(ns.command, ns.experiment, ns.seed, ns.out, ns.checkpoint_in,
                        ns.checkpoint_out, overrides, ns.jobs)
        cfg.train_config()  # validates value ranges
    except UsageError as e:
        parser.error(str(e))
    return cfg


# ---------------------------------------------------------------- execution


def _sha_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(cfg: RunConfig, status: str, started: float, extra: dict) -> None:
    manifest = {
        "status": status,
        "version": __version__,
        "python": sys.version.split()[0],
        "run": cfg.to_dict(),
        "started": started,
        **extra,
    }
    if cfg.checkpoint_in is not None and cfg.checkpoint_in.exists():
        manifest["checkpoint_in_sha256"] = _sha_file(cfg.checkpoint_in)
    if status != "running":
        manifest["finished"] = time.time()
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _train1(cfg: RunConfig, outputs: dict) -> Path:
    config = cfg.train_config()
    model = config.build_model(build_graph(include_bob=True))
    curve = pretrain_system1(model, make_curriculum("phase1-canonical"), config)
    path = cfg.checkpoint_out if cfg.command == "train1" and cfg.checkpoint_out else cfg.out / "checkpoint-phase1.json"
    outputs["train1"] = {"config": config.to_dict(), "seeds": model.seeds, "loss": list(curve),
                         "checkpoint": str(path), "sha256": save_checkpoint(model, path),
                         "checksums": model.checksums()}
    return path


def _train2(cfg: RunConfig, outputs: dict, checkpoint: Path | None) -> Path:
    if checkpoint is None:
        raise StateError("train2 needs --checkpoint-in (a phase-1 checkpoint)")
    if not checkpoint.exists():
        raise StateError(f"checkpoint {checkpoint} does not exist")
    model = load_checkpoint(checkpoint)
    config = replace(cfg.train_config(), variant=model.variant)
    before = model.checksums()["theta"]
    curve = train_system2(model, make_curriculum("phase2-diverse"), config)
    path = cfg.checkpoint_out or cfg.out / "checkpoint-phase2.json"
    outputs["train2"] = {"config": config.to_dict(), "loss": list(curve), "checkpoint": str(path),
                         "sha256": save_checkpoint(model, path), "checksums": model.checksums(),
                         "theta_unchanged": before == model.checksums()["theta"]}
    return path


def _experiment(cfg: RunConfig, name: str, outputs: dict) -> None:
    evidence = name in ("anchor", "prime", "fatigue", "frame")
    config = cfg.train_config(EVIDENCE_CONFIG if evidence else TrainConfig())
    report = run_experiment(name, cfg.seed, config, jobs=cfg.jobs)
    paths = emit_report(report, cfg.out)
    outputs[name] = {"dir": str(cfg.out / name), "aggregates": report.aggregates,
                     "files": {k: _sha_file(p) for k, p in sorted(paths.items())}}


def execute(cfg: RunConfig) -> int:
    started = time.time()
    outputs: dict = {}
    try:
        _write_manifest(cfg, "running", started, {})
        if cfg.command == "train1":
            _train1(cfg, outputs)
        elif cfg.command == "train2":
            _train2(cfg, outputs, cfg.checkpoint_in)
        elif cfg.command == "experiment":
            _experiment(cfg, cfg.experiment, outputs)
        else:
            ckpt = _train1(cfg, outputs)
            _train2(cfg, outputs, ckpt)
            for name in EXPERIMENTS:
                log.info("experiment %s", name)
                _experiment(cfg, name, outputs)
    except StateError as e:
        return _fail(cfg, started, outputs, EXIT_STATE, f"state error: {e}")
    except NumericError as e:
        return _fail(cfg, started, outputs, EXIT_NUMERIC, f"numeric failure: {e}")
    except OSError as e:
        return _fail(cfg, started, outputs, EXIT_IO, f"I/O error: {e}")
    except ValueError as e:
        # malformed checkpoints and bad configs surface here
        return _fail(cfg, started, outputs, EXIT_STATE, f"invalid input: {e}")
    _write_manifest(cfg, "ok", started, {"outputs": outputs})
    return EXIT_OK


def _fail(cfg: RunConfig, started: float, outputs: dict, code: int, message: str) -> int:
    log.error(message)
    try:
        _write_manifest(cfg, "failed", started, {"outputs": outputs, "error": message, "exit_code": code})
    except OSError:
        pass
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    cfg = parse_args(argv)
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
