"""End-to-end acceptance criteria 1-10. Each test prints one PASS/FAIL line.

Bands and orderings are asserted as stated; nothing here is tuned to the
current results. Criteria that the model does not meet stay red.
"""

import time

import numpy as np
import pytest

from dualmind.arbiter import blend, forward_pass
from dualmind.experiments import (
    ABLATION_VARIANTS, EVIDENCE_CONFIG, emit_report, run_ablation, run_anchor, run_falsebelief_loo,
    run_fatigue, run_framing, run_prime, train_evidence_model,
)
from dualmind.model import new_model, save_checkpoint
from dualmind.scenario import build_graph, enumerate_contexts, make_curriculum
from dualmind.training import TrainConfig, pretrain_system1, train_system2

from gradcheck import OPS, relative_error, tape_grad, well_conditioned_nets

pytestmark = pytest.mark.acceptance

SEEDS5 = (0, 1, 2, 3, 4)


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_criterion_01_autodiff(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    errors = []
    for net, numeric in well_conditioned_nets(rng, 100, h=1e-5):
        for a, n in zip(tape_grad(net, net.leaves), numeric):
            errors.append(relative_error(a, n))
    elapsed = time.perf_counter() - t0
    criterion(1, {"max relative error < 1e-4": max(errors) < 1e-4, "runtime < 10 s": elapsed < 10},
              nets=100, ops=len(OPS), max_rel_err=max(errors), seconds=elapsed)


def test_criterion_02_init_identity(criterion):
    t0 = time.perf_counter()
    model = new_model(seed=0)
    same, blended = True, True
    for ctx in enumerate_contexts():
        for agent in model.graph.agents:
            out = forward_pass(model, agent, ctx)
            same &= np.array_equal(out.y1.data, out.y2.data)
            blended &= np.array_equal(out.y.data, blend(out.y1, out.y1, out.g).data)
    elapsed = time.perf_counter() - t0
    criterion(2, {"y2 == y1 bit-exactly": same, "blended == blend(y1, y1, g)": blended,
                  "runtime < 1 s": elapsed < 1}, seconds=elapsed)


def test_criterion_03_ablation(criterion):
    report, elapsed = timed(run_ablation, SEEDS5)
    a = report.aggregates
    full = a["full.heldout_mean"]
    ablations = {v: a[f"{v}.heldout_mean"] for v in ABLATION_VARIANTS if v != "full"}
    checks = {"full held-out >= 80%": full >= 80.0, "runtime < 5 min": elapsed < 300}
    for v, acc in ablations.items():
        checks[f"{v} held-out <= 60%"] = acc <= 60.0
        checks[f"full - {v} >= 20 points"] = full - acc >= 20.0
    criterion(3, checks, full=full, **{v.replace("-", "_"): x for v, x in ablations.items()}, seconds=elapsed)


def test_criterion_04_false_belief_generalization(criterion):
    report, elapsed = timed(run_falsebelief_loo, 0)
    a = report.aggregates
    checks = {
        ">= 7 of 8 folds fully correct": a["folds_all_correct"] >= 7,
        "System-1 accuracy on false-belief rows <= 50%": a["system1_override_accuracy"] <= 50.0,
        "override gates in [0.35, 0.85]": 0.35 <= a["override_gate_min"] and a["override_gate_max"] <= 0.85,
        "runtime < 5 min": elapsed < 300,
    }
    failing = sorted({r.fold for r in report.records if not r.correct})
    criterion(4, checks, folds_ok=a["folds_all_correct"], failing_folds=failing,
              s1_acc=a["system1_override_accuracy"],
              gates=(a["override_gate_min"], a["override_gate_max"]), seconds=elapsed)


def test_criterion_05_anchoring(criterion):
    report, elapsed = timed(run_anchor, 0)
    a = report.aggregates
    checks = {
        "anchor g < 0.3": a["anchor.g"] < 0.3,
        "anchor P(Basket) < 0.1": a["anchor.p_basket"] < 0.1,
        "conflict g > 0.5": a["conflict.g"] > 0.5,
        "conflict P(Basket) > 0.9": a["conflict.p_basket"] > 0.9,
        "ambiguous P(Basket) in (0.6, 0.95)": 0.6 < a["ambiguous.p_basket"] < 0.95,
        "runtime < 2 min": elapsed < 120,
    }
    criterion(5, checks, anchor=(a["anchor.g"], a["anchor.p_basket"]),
              conflict=(a["conflict.g"], a["conflict.p_basket"]), ambiguous=a["ambiguous.p_basket"],
              seconds=elapsed)


def test_criterion_06_priming(criterion):
    report, elapsed = timed(run_prime, 0)
    a = report.aggregates
    p = [a["baseline.p_basket"], a["primed.p_basket"], a["after.p_basket"]]
    checks = {
        "baseline < 0.2": p[0] < 0.2,
        "primed > 0.9": p[1] > 0.9,
        "after < 0.2": p[2] < 0.2,
        "probes 1 and 3 equal within 1e-9": abs(p[0] - p[2]) <= 1e-9,
        "runtime < 2 min": elapsed < 120,
    }
    criterion(6, checks, probes=p, seconds=elapsed)


def test_criterion_07_fatigue(criterion):
    report, elapsed = timed(run_fatigue, 0)
    amb = [r for r in report.records if r.fold == 0]
    easy = [r for r in report.records if r.fold == 1]
    g = [r.g for r in amb]
    checks = {
        "ambiguous g strictly decreasing": all(x > y for x, y in zip(g, g[1:])),
        "ambiguous P(Basket) > 0.8 at load 0": amb[0].p_basket > 0.8,
        "ambiguous P(Basket) < 0.1 at load 1": amb[-1].p_basket < 0.1,
        "easy argmax correct at every load": all(r.correct for r in easy),
        "runtime < 2 min": elapsed < 120,
    }
    criterion(7, checks, g=g, p_basket=[r.p_basket for r in amb], seconds=elapsed)


def test_criterion_08_framing(criterion):
    report, elapsed = timed(run_framing, 0)
    neg, neu, pos = report.records
    same = all(
        max(abs(np.subtract(r.p1, neg.p1)).max(), abs(np.subtract(r.p2, neg.p2)).max()) <= 1e-9
        for r in (neu, pos)
    )
    checks = {
        "g(-1) < g(0) < g(+1)": neg.g < neu.g < pos.g,
        "negative P(Basket) < 0.3": neg.p_basket < 0.3,
        "neutral P(Basket) > 0.7": neu.p_basket > 0.7,
        "positive P(Basket) > 0.9": pos.p_basket > 0.9,
        "System 1 and System 2 unchanged across frames": same,
        "runtime < 2 min": elapsed < 120,
    }
    criterion(8, checks, g=[neg.g, neu.g, pos.g], p_basket=[neg.p_basket, neu.p_basket, pos.p_basket],
              seconds=elapsed)


def _two_phase(seed, path):
    cfg = TrainConfig(seed=seed)
    model = cfg.build_model(build_graph(include_bob=True))
    pretrain_system1(model, make_curriculum("phase1-canonical"), cfg)
    theta = model.checksums()["theta"]
    train_system2(model, make_curriculum("phase2-diverse"), cfg)
    return save_checkpoint(model, path), theta == model.checksums()["theta"]


def test_criterion_09_determinism_and_freeze(criterion, tmp_path):
    t0 = time.perf_counter()
    sha_a, frozen_a = _two_phase(3, tmp_path / "a.json")
    sha_b, frozen_b = _two_phase(3, tmp_path / "b.json")
    identical = (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    cfg = TrainConfig(phase1_epochs=20, phase2_epochs=10)
    report = run_falsebelief_loo(0, cfg, folds=(6,))
    first = emit_report(report, tmp_path / "r1")
    second = emit_report(report, tmp_path / "r2")
    rerun = emit_report(run_falsebelief_loo(0, cfg, folds=(6,)), tmp_path / "r3")
    reports_same = all(first[f].read_bytes() == second[f].read_bytes() == rerun[f].read_bytes() for f in first)
    elapsed = time.perf_counter() - t0
    checks = {
        "identical checkpoints": identical and sha_a == sha_b,
        "theta unchanged by phase 2": frozen_a and frozen_b,
        "re-emitted reports byte-identical": reports_same,
        "runtime < 3 min": elapsed < 180,
    }
    criterion(9, checks, seconds=elapsed)


def test_criterion_10_loss_curves(criterion):
    phase2_ok, anchor_ok, first, anchor_final = 0, 0, [], []
    for seed in SEEDS5:
        cfg = TrainConfig(seed=seed, phase2_epochs=60, phase2_tol=0.0)
        model = cfg.build_model(build_graph(include_bob=True))
        pretrain_system1(model, make_curriculum("phase1-canonical"), cfg)
        curve = train_system2(model, make_curriculum("phase2-diverse"), cfg)
        hit = next((i + 1 for i, v in enumerate(curve) if v < 1e-3), None)
        first.append(hit)
        phase2_ok += hit is not None
        _, curves = train_evidence_model(seed, EVIDENCE_CONFIG)
        c1 = curves["phase1"]
        anchor_final.append(c1[-1])
        anchor_ok += len(c1) == 60 and c1[-1] < 0.01
    checks = {
        "phase-2 loss < 1e-3 within 60 epochs in >= 4/5 seeds": phase2_ok >= 4,
        "anchor phase-1 loss < 0.01 at epoch 60 in >= 4/5 seeds": anchor_ok >= 4,
    }
    criterion(10, checks, first_epoch_below_1e3=first, anchor_final=anchor_final)
