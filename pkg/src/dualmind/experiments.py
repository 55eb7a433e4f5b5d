"""Experiment protocols and report emission (CSV, SVG, manifest)."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .arbiter import TrialRecord, WorkingMemory, forward_pass, infer, prime_store
from .model import ModelState
from .scenario import (
    AMBIGUOUS, ANCHOR, ANCHOR_PRESENTATIONS, CONFLICT, FRAMES, LOAD_GRID, Belief, Context,
    NodeKind, Semantics, build_graph, enumerate_contexts, ground_truth_belief, make_curriculum,
    oracle_trials,
)
from .svg import bar_chart, line_chart
from .training import LossCurve, TrainConfig, pretrain_system1, run_variant, train_system2

EXPERIMENTS = ("ablation", "falsebelief", "anchor", "prime", "fatigue", "frame")
ABLATION_VARIANTS = ("full", "no-meta", "meta-only", "controller-only")
ABLATION_SEEDS = (0, 1, 2, 3, 4)

# The cue-driven experiments bound each delta component and start the gate
# mostly closed, so System 2 is only recruited where training demands it.
EVIDENCE_CONFIG = TrainConfig(delta_bound=0.5, gate_bias=-2.0)

CSV_HEADER = (
    "experiment", "fold", "trial", "agent", "env0", "env1", "env2", "load", "frame", "g",
    "p1_box", "p1_basket", "p2_box", "p2_basket", "pb_box", "pb_basket", "predicted", "label",
    "correct",
)


@dataclass
class ExperimentReport:
    name: str
    records: list[TrialRecord]
    aggregates: dict[str, float]
    config: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    curves: dict[str, list[float]] = field(default_factory=dict)

    def recompute(self) -> dict[str, float]:
        return AGGREGATORS[self.name](self.records)


def _report(name: str, records: list[TrialRecord], config: TrainConfig, seeds, curves) -> ExperimentReport:
    return ExperimentReport(
        name=name,
        records=records,
        aggregates=AGGREGATORS[name](records),
        config=config.to_dict(),
        seeds=list(seeds),
        curves={k: [float(v) for v in c] for k, c in curves.items()},
    )


# ------------------------------------------------------------ boolean cues


def loo_split(fold: int) -> tuple[list[Context], Context]:
    ctxs = enumerate_contexts()
    held = ctxs[fold % len(ctxs)]
    return [c for c in ctxs if c != held], held


def loo_curricula(fold: int):
    """Phase-1 (Box-labelled) and phase-2 (all) trials on the seven training contexts."""
    train, _ = loo_split(fold)
    phase2 = oracle_trials(train, Semantics.BOOLEAN)
    phase1 = [t for t in phase2 if t.label is Belief.BOX]
    return phase1, phase2


def _evaluate(model: ModelState, experiment: str, contexts, fold: int, start: int = 0) -> list[TrialRecord]:
    trials = oracle_trials(contexts, Semantics.BOOLEAN)
    return [
        infer(model, t.agent, t.context, t.label, experiment=experiment, fold=fold, trial=start + i)
        for i, t in enumerate(trials)
    ]


def _map(fn, tasks: list, jobs: int) -> list:
    """Ordered results; independent tasks run in worker processes when ``jobs > 1``."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _ablation_cell(config: TrainConfig, seed: int, fold: int, variant: str):
    phase1, phase2 = loo_curricula(fold)
    cfg = replace(config, seed=seed, variant=variant)
    model, c = run_variant(variant, phase1, phase2, cfg)
    return _evaluate(model, f"ablation/{variant}", enumerate_contexts(), fold), c


def run_ablation(seeds: Sequence[int] = ABLATION_SEEDS, config: TrainConfig | None = None,
                 variants: Sequence[str] = ABLATION_VARIANTS, jobs: int = 1) -> ExperimentReport:
    """Seen and held-out accuracy per variant; the held-out context rotates with the seed index."""
    config = config or TrainConfig()
    tasks = [(config, seed, i % 8, v) for i, seed in enumerate(seeds) for v in variants]
    records, curves = [], {}
    for (_, seed, _, v), (recs, c) in zip(tasks, _map(_ablation_cell, tasks, jobs)):
        records += recs
        curves[f"{v}/seed{seed}/phase2"] = c["phase2"]
    return _report("ablation", records, config, seeds, curves)


def _loo_fold(config: TrainConfig, fold: int):
    phase1, phase2 = loo_curricula(fold)
    model, c = run_variant("full", phase1, phase2, config)
    return _evaluate(model, "falsebelief", [loo_split(fold)[1]], fold), c


def run_falsebelief_loo(seed: int = 0, config: TrainConfig | None = None,
                        folds: Sequence[int] = range(8), jobs: int = 1) -> ExperimentReport:
    """Train the full model on seven contexts and query every agent on the eighth."""
    config = replace(config or TrainConfig(), seed=seed, variant="full")
    records, curves = [], {}
    tasks = [(config, fold) for fold in folds]
    for (_, fold), (recs, c) in zip(tasks, _map(_loo_fold, tasks, jobs)):
        records += recs
        curves[f"fold{fold}/phase1"] = c["phase1"]
        curves[f"fold{fold}/phase2"] = c["phase2"]
    return _report("falsebelief", records, config, [seed], curves)


# ------------------------------------------------------------ evidence cues

SALLY = NodeKind.SALLY


def _evidence_record(model, context: Context, experiment: str, fold: int, trial: int,
                     memory: WorkingMemory | None = None) -> TrialRecord:
    label = ground_truth_belief(context, SALLY, Semantics.EVIDENCE)
    return infer(model, SALLY, context, label, memory=memory, experiment=experiment, fold=fold, trial=trial)


def train_evidence_model(seed: int = 0, config: TrainConfig | None = None,
                         phase2_kind: str = "phase2-evidence") -> tuple[ModelState, dict[str, LossCurve]]:
    """Anchor System 1 on the canonical context, then train controller and gate."""
    config = replace(config or EVIDENCE_CONFIG, seed=seed, variant="full")
    model = config.build_model(build_graph(include_bob=False))
    c1 = pretrain_system1(model, make_curriculum("anchor"), config)
    c2 = train_system2(model, make_curriculum(phase2_kind), config)
    return model, {"phase1": c1, "phase2": c2}


def run_anchor(seed: int = 0, config: TrainConfig | None = None) -> ExperimentReport:
    """Phase A (fold 0): anchored System 1 re-shown the anchor context.
    Phase B (fold 1): the trained model on anchor, conflicting and ambiguous contexts."""
    config = replace(config or EVIDENCE_CONFIG, seed=seed, variant="full")
    model = config.build_model(build_graph(include_bob=False))
    c1 = pretrain_system1(model, make_curriculum("anchor"), config)
    records = [
        _evidence_record(model, t.context, "anchor", 0, i)
        for i, t in enumerate(make_curriculum("anchor"))
    ]
    c2 = train_system2(model, make_curriculum("phase2-evidence"), config)
    records += [
        _evidence_record(model, c, "anchor", 1, ANCHOR_PRESENTATIONS + i)
        for i, c in enumerate((ANCHOR, CONFLICT, AMBIGUOUS))
    ]
    return _report("anchor", records, config, [seed], {"phase1": c1, "phase2": c2})


def run_prime(seed: int = 0, config: TrainConfig | None = None) -> ExperimentReport:
    """Baseline probe, prime presentation, primed probe, unprimed probe."""
    model, curves = train_evidence_model(seed, config, phase2_kind="phase2-habitual")
    memory = WorkingMemory()
    records = []
    for i, t in enumerate(make_curriculum("prime")):
        if t.context == CONFLICT:
            # the prime itself: recorded, then its delta is parked in working memory
            records.append(_evidence_record(model, t.context, "prime", 1, i))
            prime_store(memory, forward_pass(model, SALLY, t.context).delta)
        else:
            records.append(_evidence_record(model, t.context, "prime", 0, i, memory))
    cfg = replace(config or EVIDENCE_CONFIG, seed=seed)
    return _report("prime", records, cfg, [seed], curves)


def run_fatigue(seed: int = 0, config: TrainConfig | None = None,
                loads: Sequence[float] = LOAD_GRID) -> ExperimentReport:
    """Ambiguous (fold 0) and easy (fold 1) contexts across the load grid."""
    model, curves = train_evidence_model(seed, config)
    records = []
    for i, load in enumerate(loads):
        records.append(_evidence_record(model, AMBIGUOUS.with_(load=load), "fatigue", 0, i))
        records.append(_evidence_record(model, ANCHOR.with_(load=load), "fatigue", 1, i))
    cfg = replace(config or EVIDENCE_CONFIG, seed=seed)
    return _report("fatigue", records, cfg, [seed], curves)


def run_framing(seed: int = 0, config: TrainConfig | None = None) -> ExperimentReport:
    model, curves = train_evidence_model(seed, config)
    records = [
        _evidence_record(model, t.context, "frame", 0, i)
        for i, t in enumerate(make_curriculum("frame"))
    ]
    cfg = replace(config or EVIDENCE_CONFIG, seed=seed)
    return _report("frame", records, cfg, [seed], curves)


def run_experiment(name: str, seed: int = 0, config: TrainConfig | None = None,
                   jobs: int = 1) -> ExperimentReport:
    """Dispatch by name. The ablation always uses its five fixed seeds."""
    if name == "ablation":
        return run_ablation(config=config, jobs=jobs)
    if name == "falsebelief":
        return run_falsebelief_loo(seed, config, jobs=jobs)
    runners = {"anchor": run_anchor, "prime": run_prime, "fatigue": run_fatigue, "frame": run_framing}
    if name not in runners:
        raise ValueError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    return runners[name](seed, config)


# ------------------------------------------------------------ aggregates


def _acc(records) -> float:
    return 100.0 * sum(r.correct for r in records) / len(records) if records else float("nan")


def is_override(r: TrialRecord) -> bool:
    """Rows whose answer departs from the habitual Box."""
    return r.label is Belief.BASKET


def _is_held_out(r: TrialRecord) -> bool:
    return r.context == loo_split(r.fold)[1]


def aggregate_ablation(records) -> dict[str, float]:
    out = {}
    variants = sorted({r.experiment.split("/", 1)[1] for r in records}, key=_variant_order)
    for v in variants:
        rows = [r for r in records if r.experiment == f"ablation/{v}"]
        folds = sorted({r.fold for r in rows})
        seen = [_acc([r for r in rows if r.fold == f and not _is_held_out(r)]) for f in folds]
        held = [_acc([r for r in rows if r.fold == f and _is_held_out(r)]) for f in folds]
        out[f"{v}.seen_mean"] = float(np.mean(seen))
        out[f"{v}.seen_std"] = float(np.std(seen))
        out[f"{v}.heldout_mean"] = float(np.mean(held))
        out[f"{v}.heldout_std"] = float(np.std(held))
        out[f"{v}.heldout_correct"] = sum(r.correct for r in rows if _is_held_out(r))
        out[f"{v}.heldout_n"] = sum(1 for r in rows if _is_held_out(r))
    return out


def _variant_order(v: str) -> tuple[int, str]:
    return (ABLATION_VARIANTS.index(v) if v in ABLATION_VARIANTS else len(ABLATION_VARIANTS), v)


def aggregate_falsebelief(records) -> dict[str, float]:
    folds = sorted({r.fold for r in records})
    over = [r for r in records if is_override(r)]
    s1_correct = sum(r.p1[1] > r.p1[0] for r in over)
    gates = [r.g for r in over]
    return {
        "folds": len(folds),
        "folds_all_correct": sum(all(r.correct for r in records if r.fold == f) for f in folds),
        "accuracy": _acc(records),
        "override_rows": len(over),
        "system1_override_accuracy": 100.0 * s1_correct / len(over) if over else float("nan"),
        "override_gate_min": min(gates) if gates else float("nan"),
        "override_gate_max": max(gates) if gates else float("nan"),
        "mean_gate": float(np.mean([r.g for r in records])),
    }


def _named(records, names) -> dict[str, float]:
    out = {}
    for name, r in zip(names, records):
        out[f"{name}.g"] = r.g
        out[f"{name}.p_basket"] = r.p_basket
        out[f"{name}.p1_basket"] = r.p1[1]
        out[f"{name}.p2_basket"] = r.p2[1]
    return out


def aggregate_anchor(records) -> dict[str, float]:
    shown = [r for r in records if r.fold == 0]
    out = {"presentations": len(shown), "presentation_p_box_mean": float(np.mean([r.blended[0] for r in shown]))}
    out.update(_named([r for r in records if r.fold == 1], ("anchor", "conflict", "ambiguous")))
    return out


def aggregate_prime(records) -> dict[str, float]:
    probes = [r for r in records if r.fold == 0]
    return _named(probes, ("baseline", "primed", "after"))


def aggregate_fatigue(records) -> dict[str, float]:
    out = {}
    for fold, name in ((0, "ambiguous"), (1, "easy")):
        rows = [r for r in records if r.fold == fold]
        for r in rows:
            key = f"{name}.load{r.context.load:g}"
            out[f"{key}.g"] = r.g
            out[f"{key}.p_basket"] = r.p_basket
            out[f"{key}.error"] = 0.0 if r.correct else 1.0
        out[f"{name}.error_rate"] = 1.0 - _acc(rows) / 100.0
    return out


def aggregate_frame(records) -> dict[str, float]:
    names = {-1.0: "negative", 0.0: "neutral", 1.0: "positive"}
    return _named(records, [names[r.context.frame] for r in records])


AGGREGATORS: dict[str, Callable[[list[TrialRecord]], dict[str, float]]] = {
    "ablation": aggregate_ablation,
    "falsebelief": aggregate_falsebelief,
    "anchor": aggregate_anchor,
    "prime": aggregate_prime,
    "fatigue": aggregate_fatigue,
    "frame": aggregate_frame,
}


# ------------------------------------------------------------ emission


def record_row(r: TrialRecord) -> list:
    return [
        r.experiment, r.fold, r.trial, r.agent.value, *r.context.env, r.context.load, r.context.frame,
        r.g, *r.p1, *r.p2, *r.blended, r.predicted.name.capitalize(), r.label.name.capitalize(),
        int(r.correct),
    ]


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def records_csv(report: ExperimentReport) -> str:
    return _csv([CSV_HEADER, *(record_row(r) for r in report.records)])


def aggregates_csv(report: ExperimentReport) -> str:
    return _csv([("metric", "value"), *sorted(report.aggregates.items())])


def figures(report: ExperimentReport) -> dict[str, str]:
    """SVG documents keyed by file name."""
    a, recs = report.aggregates, report.records
    name = report.name
    if name == "ablation":
        vs = sorted({r.experiment.split("/", 1)[1] for r in recs}, key=_variant_order)
        return {"figure-ablation.svg": bar_chart(
            "Accuracy by variant", vs,
            {"seen": [a[f"{v}.seen_mean"] for v in vs], "held-out": [a[f"{v}.heldout_mean"] for v in vs]},
            ylabel="accuracy (%)", y_range=(0.0, 100.0))}
    if name == "falsebelief":
        cats = [f"{r.agent.value[0]}{''.join(str(int(e)) for e in r.context.env)}" for r in recs]
        return {"figure-falsebelief.svg": bar_chart(
            "Held-out queries", cats,
            {"gate": [r.g for r in recs], "P(Basket)": [r.p_basket for r in recs],
             "System 1 P(Basket)": [r.p1[1] for r in recs]})}
    if name == "anchor":
        cats = ["anchor", "conflict", "ambiguous"]
        return {"figure-anchor.svg": bar_chart(
            "Anchoring and override", cats,
            {"gate": [a[f"{c}.g"] for c in cats], "P(Basket)": [a[f"{c}.p_basket"] for c in cats]})}
    if name == "prime":
        probes = ("baseline", "primed", "after")
        return {"figure-prime.svg": line_chart(
            "One-shot priming", [1.0, 2.0, 3.0], {"P(Basket)": [a[f"{p}.p_basket"] for p in probes]},
            xlabel="probe", ylabel="probability", x_labels=list(probes))}
    if name == "fatigue":
        out = {}
        for fold, label in ((0, "ambiguous"), (1, "easy")):
            rows = [r for r in recs if r.fold == fold]
            loads = [r.context.load for r in rows]
            out[f"figure-fatigue-{label}.svg"] = line_chart(
                f"Load, {label} context", loads,
                {"gate": [r.g for r in rows], "blended P(Basket)": [r.p_basket for r in rows],
                 "System 1 P(Basket)": [r.p1[1] for r in rows], "System 2 P(Basket)": [r.p2[1] for r in rows]},
                xlabel="load", ylabel="value")
            out[f"figure-fatigue-{label}-error.svg"] = line_chart(
                f"Error rate, {label} context", loads, {"error": [0.0 if r.correct else 1.0 for r in rows]},
                xlabel="load", ylabel="error")
        return out
    if name == "frame":
        cats = ["negative", "neutral", "positive"]
        return {"figure-frame.svg": bar_chart(
            "Framing", cats,
            {"gate": [a[f"{c}.g"] for c in cats], "blended P(Basket)": [a[f"{c}.p_basket"] for c in cats],
             "System 1 P(Basket)": [a[f"{c}.p1_basket"] for c in cats],
             "System 2 P(Basket)": [a[f"{c}.p2_basket"] for c in cats]})}
    raise ValueError(f"no figures for {name!r}")


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def emit_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """Write ``<out>/<name>/`` files; identical reports give identical bytes."""
    target = Path(out_dir) / report.name
    files = {"records.csv": records_csv(report), "aggregates.csv": aggregates_csv(report)}
    files.update(figures(report))
    manifest = {
        "experiment": report.name,
        "version": __version__,
        "config": report.config,
        "seeds": report.seeds,
        "loss_curves": report.curves,
        "checksums": {k: _sha(v) for k, v in sorted(files.items())},
    }
    files["manifest.json"] = json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    try:
        target.mkdir(parents=True, exist_ok=True)
        paths = {}
        for fname, text in files.items():
            p = target / fname
            p.write_text(text)
            paths[fname] = p
    except OSError as e:
        raise OSError(f"cannot write report to {target}: {e}") from e
    return paths
