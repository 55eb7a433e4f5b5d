"""Habitual pathway: one GCN layer, agent readout plus meta-vector, MLP head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .scenario import NodeKind, ScenarioGraph
from .tensor import Tensor


@dataclass(frozen=True)
class DimsConfig:
    feature_dim: int
    agents: tuple[NodeKind, ...]
    hidden_dim: int = 16
    meta_dim: int = 8
    head_hidden: int = 16
    num_classes: int = 2

    def __post_init__(self):
        for name in ("feature_dim", "hidden_dim", "meta_dim", "head_hidden"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be a positive integer")
        if self.num_classes != 2:
            raise ValueError("exactly two belief classes are supported")
        if not self.agents or any(not a.is_agent for a in self.agents):
            raise ValueError(f"bad agent roster {self.agents}")

    @classmethod
    def for_graph(cls, graph: ScenarioGraph, **kw) -> "DimsConfig":
        return cls(feature_dim=graph.feature_dim, agents=graph.agents, **kw)

    def blocks(self) -> list[tuple[str, tuple[int, ...]]]:
        """Named parameter blocks in flattening order."""
        h, m, hh, c = self.hidden_dim, self.meta_dim, self.head_hidden, self.num_classes
        out = [
            ("w_gcn", (self.feature_dim, h)),
            ("w1", (h + m, hh)),
            ("b1", (hh,)),
            ("w2", (hh, c)),
            ("b2", (c,)),
        ]
        out += [(f"meta:{a.value}", (m,)) for a in self.agents]
        return out

    @property
    def num_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.blocks())

    def meta_slice(self, agent: NodeKind) -> slice:
        start = 0
        for name, shape in self.blocks():
            size = int(np.prod(shape))
            if name == f"meta:{agent.value}":
                return slice(start, start + size)
            start += size
        raise LookupError(f"{agent.value} has no meta-vector")

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "agents": [a.value for a in self.agents],
            "hidden_dim": self.hidden_dim,
            "meta_dim": self.meta_dim,
            "head_hidden": self.head_hidden,
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DimsConfig":
        d = dict(d)
        d["agents"] = tuple(NodeKind(a) for a in d["agents"])
        return cls(**d)


@dataclass
class System1Params:
    w_gcn: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    meta: dict[NodeKind, Tensor]

    def weights(self) -> list[Tensor]:
        return [self.w_gcn, self.w1, self.b1, self.w2, self.b2]

    def meta_vectors(self) -> list[Tensor]:
        return list(self.meta.values())


def init_system1(dims: DimsConfig, rng: np.random.Generator) -> System1Params:
    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    h, m, hh, c = dims.hidden_dim, dims.meta_dim, dims.head_hidden, dims.num_classes
    return System1Params(
        w_gcn=uniform((dims.feature_dim, h), dims.feature_dim),
        w1=uniform((h + m, hh), h + m),
        b1=uniform((hh,), h + m),
        w2=uniform((hh, c), hh),
        b2=uniform((c,), hh),
        meta={a: Tensor(rng.normal(0.0, 0.1, size=m), requires_grad=True) for a in dims.agents},
    )


def forward_system1(graph: ScenarioGraph, agent: NodeKind, params: System1Params,
                    use_meta: bool = True) -> Tensor:
    """Belief logits ``[box, basket]`` for ``agent``.

    With ``use_meta=False`` the meta-vector slot is fed zeros, so meta
    parameters (and any delta applied to them) cannot reach the output.
    """
    i = graph.index(agent)
    if agent not in params.meta:
        raise LookupError(f"{agent.value} has no meta-vector")
    ax = Tensor(graph.adjacency @ graph.features)
    h = T.relu(T.matmul(ax, params.w_gcn))
    meta = params.meta[agent] if use_meta else Tensor(np.zeros(params.meta[agent].shape))
    z = T.concat(h[i], meta)
    z = T.relu(T.matmul(z, params.w1) + params.b1)
    return T.matmul(z, params.w2) + params.b2


def flatten_params(params: System1Params) -> Tensor:
    parts = [T.reshape(p, (p.size,)) for p in params.weights()]
    return T.concat(*parts, *params.meta_vectors())


def unflatten_params(v: Tensor, dims: DimsConfig) -> System1Params:
    if v.shape != (dims.num_params,):
        raise T.ShapeError(f"expected a flat vector of {dims.num_params}, got {v.shape}")
    out = {}
    start = 0
    for name, shape in dims.blocks():
        size = int(np.prod(shape))
        out[name] = T.reshape(T.take(v, start, start + size), shape)
        start += size
    meta = {a: out.pop(f"meta:{a.value}") for a in dims.agents}
    return System1Params(meta=meta, **out)


def flat_values(params: System1Params) -> np.ndarray:
    """Flat float array without touching any tape."""
    return np.concatenate([p.data.reshape(-1) for p in params.weights() + params.meta_vectors()])
