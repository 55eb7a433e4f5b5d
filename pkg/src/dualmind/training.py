"""Two-phase training: System 1 pretraining, then controller + gate with System 1 frozen."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import tensor as T
from .arbiter import forward_pass
from .model import ModelState, new_model, resolve_variant
from .scenario import Trial, graph_for
from .system1 import forward_system1
from .tensor import AdamState, StateError, Tape, adam_step, backward, zero_grads

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    phase1_epochs: int = 60
    phase2_epochs: int = 200
    lr: float = 0.01
    seed: int = 0
    freeze_meta_in_phase2: bool = False
    variant: str = "full"
    # early stop for phase 2 once the mean loss falls below this
    phase2_tol: float = 1e-4
    # "batch": one Adam step per epoch on the mean loss; "trial": one per trial
    update: str = "batch"
    # tanh bound on each delta component (None: unbounded)
    delta_bound: float | None = None
    # initial gate output bias (None: the usual uniform init)
    gate_bias: float | None = None
    # DimsConfig overrides, e.g. {"hidden_dim": 32}
    dims: dict = field(default_factory=dict)

    def __post_init__(self):
        self.variant = resolve_variant(self.variant)
        if self.phase1_epochs < 0 or self.phase2_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.delta_bound is not None and self.delta_bound <= 0:
            raise ValueError("delta_bound must be positive")
        if self.update not in ("trial", "batch"):
            raise ValueError(f"update must be 'trial' or 'batch', got {self.update!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def build_model(self, graph) -> ModelState:
        return new_model(graph, seed=self.seed, variant=self.variant,
                         delta_bound=self.delta_bound, gate_bias=self.gate_bias, **self.dims)


class LossCurve(list):
    """Per-epoch mean cross-entropy."""

    @property
    def final(self) -> float:
        return self[-1] if self else float("nan")


def _check(loss: T.Tensor, epoch: int, phase: str) -> float:
    value = loss.item()
    if not np.isfinite(value):
        raise T.NumericError(f"{phase}: non-finite loss at epoch {epoch}")
    return value


def _validate(trials: Sequence[Trial], model: ModelState) -> None:
    if not trials:
        raise ValueError("empty trial list")
    for t in trials:
        if graph_for(t.semantics) is not model.graph:
            raise ValueError(f"trial for {t.semantics.value} cues does not match the model graph")


def _trial_loss_s1(model: ModelState, trial: Trial) -> T.Tensor:
    logits = forward_system1(model.graph, trial.agent, model.theta, model.use_meta)
    return T.cross_entropy(logits, int(trial.label))


def _trial_loss_s2(model: ModelState, trial: Trial) -> T.Tensor:
    return T.cross_entropy(forward_pass(model, trial.agent, trial.context).y, int(trial.label))


def _step(loss: T.Tensor, tape: Tape, params: list[T.Tensor], state: AdamState) -> None:
    zero_grads(params)
    if loss._tape is tape:
        backward(loss, tape)
    for p in params:
        # untouched parameters (e.g. controller behind a zero gate) get an exact zero
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
    adam_step(params, state)


def _run_epoch(model, trials, params, state, trial_loss, update: str, phase: str, epoch: int) -> float:
    """One pass over ``trials``; returns the mean of the losses seen before each step."""
    if update == "batch":
        with Tape() as tape:
            loss = T.mean([trial_loss(model, t) for t in trials])
        value = _check(loss, epoch, phase)
        if params:
            _step(loss, tape, params, state)
        return value
    values = []
    for t in trials:
        with Tape() as tape:
            loss = trial_loss(model, t)
        values.append(_check(loss, epoch, phase))
        if params:
            _step(loss, tape, params, state)
    return float(np.mean(values))


def pretrain_system1(model: ModelState, trials: Sequence[Trial], config: TrainConfig) -> LossCurve:
    """Adam on the GCN, head and (unless ablated) meta-vectors."""
    _validate(trials, model)
    params = model.system1_tensors()
    state = AdamState(lr=config.lr)
    curve = LossCurve()
    try:
        for epoch in range(config.phase1_epochs):
            curve.append(_run_epoch(model, trials, params, state, _trial_loss_s1,
                                    config.update, "phase 1", epoch))
    finally:
        zero_grads(params)
    model.pretrained = True
    model.freeze_snapshot()
    return curve


def phase2_tensors(model: ModelState, config: TrainConfig) -> list[T.Tensor]:
    params = []
    if model.use_controller:
        params += model.phi.tensors()
    if model.gate_fixed is None:
        params += model.psi.tensors()
    if model.use_meta and not config.freeze_meta_in_phase2:
        params += model.theta.meta_vectors()
    return params


def phase2_loss(model: ModelState, trials: Sequence[Trial]) -> T.Tensor:
    """Mean cross-entropy of the blended logits."""
    return T.mean([_trial_loss_s2(model, t) for t in trials])


def train_system2(model: ModelState, trials: Sequence[Trial], config: TrainConfig) -> LossCurve:
    """Train controller, gate and meta-vectors on blended logits; GCN and head stay frozen."""
    if not model.pretrained:
        raise StateError("System 1 must be pretrained before phase 2")
    _validate(trials, model)
    frozen = model.theta.weights()
    for p in frozen:
        p.requires_grad = False
    params = phase2_tensors(model, config)
    state = AdamState(lr=config.lr)
    curve = LossCurve()
    try:
        for epoch in range(config.phase2_epochs):
            curve.append(_run_epoch(model, trials, params, state, _trial_loss_s2,
                                    config.update, "phase 2", epoch))
            if curve.final < config.phase2_tol:
                break
    finally:
        zero_grads(params)
        for p in frozen:
            p.requires_grad = True
    log.debug("phase 2 (%s) stopped after %d epochs at loss %.3g", model.variant, len(curve), curve.final)
    return curve


def run_variant(variant: str, phase1: Sequence[Trial], phase2: Sequence[Trial],
                config: TrainConfig, graph=None) -> tuple[ModelState, dict[str, LossCurve]]:
    """Build a model with the variant's switches and run both phases."""
    graph = graph if graph is not None else graph_for(phase2[0].semantics)
    model = replace(config, variant=variant).build_model(graph)
    c1 = pretrain_system1(model, phase1, config)
    c2 = train_system2(model, phase2, config)
    return model, {"phase1": c1, "phase2": c2}
