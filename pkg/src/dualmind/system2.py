"""Deliberative pathway: an MLP that predicts a delta for the System 1 parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .scenario import Context, NodeKind, ScenarioGraph
from .system1 import DimsConfig, forward_system1, unflatten_params
from .tensor import Tensor

CONTROLLER_HIDDEN = 64
# The controller sees the factual cues only; load and frame are routed to the gate.
CONTEXT_INPUTS = 3
# A 0/1 cue has standard deviation 0.5; doubling puts the cues on unit scale.
CUE_GAIN = 2.0


@dataclass
class ControllerParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    # optional tanh bound on each delta component; None means raw additive delta
    bound: float | None = None

    def tensors(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]


def controller_input_dim(num_params: int) -> int:
    return 2 + num_params + CONTEXT_INPUTS


def init_controller(num_params: int, rng: np.random.Generator,
                    hidden: int = CONTROLLER_HIDDEN, bound: float | None = None) -> ControllerParams:
    n_in = controller_input_dim(num_params)
    lim = 1.0 / np.sqrt(n_in)
    # Fan-in init per input block. With one global fan-in the hundreds of
    # parameter inputs would drown the three context cues at the start.
    w1 = np.empty((n_in, hidden))
    for a, b in _input_blocks(num_params):
        w1[a:b] = rng.uniform(-1.0, 1.0, size=(b - a, hidden)) / np.sqrt(b - a)
    return ControllerParams(
        w1=Tensor(w1, requires_grad=True),
        b1=Tensor(rng.uniform(-lim, lim, size=hidden), requires_grad=True),
        # zero output layer: training starts from the System 1 solution
        w2=Tensor(np.zeros((hidden, num_params)), requires_grad=True),
        b2=Tensor(np.zeros(num_params), requires_grad=True),
        bound=bound,
    )


def _input_blocks(num_params: int) -> list[tuple[int, int]]:
    """Row ranges of the System 1 output, parameter and cue inputs."""
    n_in = controller_input_dim(num_params)
    return [(0, 2), (2, 2 + num_params), (2 + num_params, n_in)]


def controller_input(y1: Tensor, theta_flat: Tensor, context: Context) -> Tensor:
    """``softmax(y1) | theta / P | 2 * env``.

    The parameter vector is the frozen phase-1 snapshot and so acts as a
    constant; averaging it keeps that constant from swamping the hidden layer.
    """
    return T.concat(
        T.softmax(y1),
        T.scale(theta_flat, 1.0 / theta_flat.size),
        Tensor(CUE_GAIN * context.vector()[:CONTEXT_INPUTS]),
    )


def controller_delta(y1: Tensor, theta_flat: Tensor, context: Context, phi: ControllerParams) -> Tensor:
    if y1.shape != (2,):
        raise T.ShapeError(f"System 1 logits must have shape (2,), got {y1.shape}")
    if theta_flat.shape != (phi.out_dim,):
        raise T.ShapeError(
            f"flat parameters {theta_flat.shape} do not match controller output ({phi.out_dim},)"
        )
    x = controller_input(y1, theta_flat, context)
    h = T.relu(T.matmul(x, phi.w1) + phi.b1)
    delta = T.matmul(h, phi.w2) + phi.b2
    if phi.bound is not None:
        delta = T.scale(T.tanh(T.scale(delta, 1.0 / phi.bound)), phi.bound)
    return delta


def adapted_forward(graph: ScenarioGraph, agent: NodeKind, theta_flat: Tensor, delta: Tensor,
                    dims: DimsConfig, use_meta: bool = True) -> Tensor:
    """System 1 logits evaluated at the injected parameters ``theta + delta``."""
    if theta_flat.shape != delta.shape:
        raise T.ShapeError(f"delta {delta.shape} does not match parameters {theta_flat.shape}")
    adapted = unflatten_params(theta_flat + delta, dims)
    return forward_system1(graph, agent, adapted, use_meta=use_meta)
