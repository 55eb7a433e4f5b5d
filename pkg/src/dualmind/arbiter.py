"""Context gate, logit blending, one-shot working memory and the inference pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from . import tensor as T
from .scenario import Belief, Context, NodeKind
from .system1 import flatten_params, forward_system1
from .system2 import adapted_forward, controller_delta
from .tensor import Tensor

if TYPE_CHECKING:
    from .model import ModelState

GATE_HIDDEN = 8
LOAD_SUPPRESSION = 6.0


@dataclass
class GateParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    kappa: float = LOAD_SUPPRESSION

    def tensors(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]


def init_gate(rng: np.random.Generator, hidden: int = GATE_HIDDEN) -> GateParams:
    def uniform(shape, fan_in):
        lim = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-lim, lim, size=shape), requires_grad=True)

    return GateParams(
        w1=uniform((4, hidden), 4),
        b1=uniform((hidden,), 4),
        w2=uniform((hidden, 1), hidden),
        b2=uniform((1,), hidden),
    )


def gate(context: Context, psi: GateParams) -> Tensor:
    """System 2 weight in (0, 1); load enters as a fixed penalty before the sigmoid.

    Cues are centred (``2 * env - 1``) so that opposite cue patterns push the
    gate in opposite directions instead of sharing one positive input.
    """
    x = Tensor([*(2.0 * np.asarray(context.env) - 1.0), context.frame])
    h = T.relu(T.matmul(x, psi.w1) + psi.b1)
    pre = T.matmul(h, psi.w2) + psi.b2
    return T.sigmoid(pre - Tensor([psi.kappa * context.load]))


def blend(y1: Tensor, y2: Tensor, g: Tensor | float) -> Tensor:
    """Convex combination ``g * y2 + (1 - g) * y1`` on logits."""
    if isinstance(g, Tensor):
        return T.scale(y2, g) + T.scale(y1, Tensor([1.0]) - g)
    return T.scale(y2, g) + T.scale(y1, 1.0 - g)


@dataclass
class PrimeRecord:
    delta: np.ndarray
    gate: float = 1.0


class WorkingMemory:
    """Single slot holding one priming override; reading it empties the slot."""

    def __init__(self):
        self._slot: PrimeRecord | None = None

    @property
    def occupied(self) -> bool:
        return self._slot is not None

    def peek(self) -> PrimeRecord | None:
        return self._slot


def prime_store(memory: WorkingMemory, delta) -> None:
    values = delta.data if isinstance(delta, Tensor) else np.asarray(delta, dtype=np.float64)
    memory._slot = PrimeRecord(values.copy())


def prime_consume(memory: WorkingMemory) -> PrimeRecord | None:
    record, memory._slot = memory._slot, None
    return record


class Pass(NamedTuple):
    y1: Tensor
    y2: Tensor
    g: Tensor | float
    y: Tensor
    delta: Tensor
    primed: bool


def forward_pass(model: "ModelState", agent: NodeKind, context: Context,
                 memory: WorkingMemory | None = None) -> Pass:
    """Full dual-process forward; differentiable when run inside a tape."""
    graph, dims = model.graph, model.dims
    y1 = forward_system1(graph, agent, model.theta, use_meta=model.use_meta)
    override = prime_consume(memory) if memory is not None else None
    if override is not None:
        delta = Tensor(override.delta)
        g: Tensor | float = override.gate
    else:
        if model.use_controller:
            delta = controller_delta(y1, Tensor(model.controller_input_params()), context, model.phi)
        else:
            delta = Tensor(np.zeros(dims.num_params))
        g = model.gate_fixed if model.gate_fixed is not None else gate(context, model.psi)
    base = flatten_params(model.theta)
    y2 = adapted_forward(graph, agent, base, delta, dims, use_meta=model.use_meta)
    return Pass(y1, y2, g, blend(y1, y2, g), delta, override is not None)


@dataclass(frozen=True)
class TrialRecord:
    experiment: str
    context: Context
    agent: NodeKind
    g: float
    p1: tuple[float, float]
    p2: tuple[float, float]
    blended: tuple[float, float]
    label: Belief
    fold: int = 0
    trial: int = 0

    @property
    def predicted(self) -> Belief:
        return argmax_belief(self.blended)

    @property
    def correct(self) -> bool:
        return self.predicted is self.label

    @property
    def p_basket(self) -> float:
        return self.blended[1]


def argmax_belief(p) -> Belief:
    # ties resolve to the habitual default
    return Belief.BASKET if p[1] > p[0] else Belief.BOX


def _dist(logits: Tensor) -> tuple[float, float]:
    p = T.softmax_array(logits.data)
    return float(p[0]), float(p[1])


def infer(model: "ModelState", agent: NodeKind, context: Context, label: Belief,
          memory: WorkingMemory | None = None, experiment: str = "",
          fold: int = 0, trial: int = 0) -> TrialRecord:
    out = forward_pass(model, agent, context, memory)
    g = out.g.item() if isinstance(out.g, Tensor) else float(out.g)
    return TrialRecord(
        experiment=experiment,
        context=context,
        agent=agent,
        g=g,
        p1=_dist(out.y1),
        p2=_dist(out.y2),
        blended=_dist(out.y),
        label=label,
        fold=fold,
        trial=trial,
    )
