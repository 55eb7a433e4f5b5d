"""Sally-Anne style scenarios as relational graphs, contexts and curricula."""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np


class ValidationError(ValueError):
    pass


class NodeKind(enum.Enum):
    SALLY = "Sally"
    ANNE = "Anne"
    BOB = "Bob"
    BOX = "Box"
    BASKET = "Basket"
    TOY = "Toy"

    @property
    def is_agent(self) -> bool:
        return self in AGENT_KINDS


AGENT_KINDS = (NodeKind.SALLY, NodeKind.ANNE, NodeKind.BOB)


class Belief(enum.IntEnum):
    BOX = 0
    BASKET = 1


class Semantics(enum.Enum):
    # [sally_present, anne_moves, bob_peeks], booleans
    BOOLEAN = "boolean"
    # [sally_present, p(toy in box), anne moved evidence], reals in [0, 1]
    EVIDENCE = "evidence"


FRAMES = (-1.0, 0.0, 1.0)


@dataclass(frozen=True)
class Context:
    env: tuple[float, float, float]
    load: float = 0.0
    frame: float = 0.0

    def __post_init__(self):
        env = tuple(float(e) for e in self.env)
        if len(env) != 3:
            raise ValidationError(f"env must have 3 cues, got {len(env)}")
        if any(not 0.0 <= e <= 1.0 for e in env):
            raise ValidationError(f"env cues must lie in [0, 1]: {env}")
        if float(self.frame) not in FRAMES:
            raise ValidationError(f"frame must be one of {FRAMES}, got {self.frame}")
        object.__setattr__(self, "env", env)
        object.__setattr__(self, "load", min(1.0, max(0.0, float(self.load))))
        object.__setattr__(self, "frame", float(self.frame))

    def vector(self) -> np.ndarray:
        """Serialised as ``[env0, env1, env2, load, frame]``."""
        return np.array([*self.env, self.load, self.frame])

    def with_(self, **changes) -> "Context":
        fields = {"env": self.env, "load": self.load, "frame": self.frame}
        fields.update(changes)
        return Context(**fields)


@dataclass(frozen=True)
class ScenarioGraph:
    nodes: tuple[NodeKind, ...]
    edges: tuple[tuple[int, int], ...]
    features: np.ndarray
    adjacency: np.ndarray

    @property
    def agents(self) -> tuple[NodeKind, ...]:
        return tuple(k for k in self.nodes if k.is_agent)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def index(self, kind: NodeKind) -> int:
        try:
            return self.nodes.index(kind)
        except ValueError:
            raise LookupError(f"{kind.value} is not in this graph") from None


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """Symmetric GCN normalisation ``D^-1/2 (A + I) D^-1/2``."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"adjacency must be square, got {a.shape}")
    if not np.array_equal(a, a.T):
        raise ValidationError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0):
        raise ValidationError("adjacency must have a zero diagonal")
    a_hat = a + np.eye(a.shape[0])
    d = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return d[:, None] * a_hat * d[None, :]


def build_graph(include_bob: bool = False) -> ScenarioGraph:
    """Canonical roster; graphs are shared, immutable instances."""
    return _build_graph(bool(include_bob))


@lru_cache(maxsize=None)
def _build_graph(include_bob: bool) -> ScenarioGraph:
    nodes = [NodeKind.SALLY, NodeKind.ANNE]
    if include_bob:
        nodes.append(NodeKind.BOB)
    nodes += [NodeKind.BOX, NodeKind.BASKET, NodeKind.TOY]
    idx = {k: i for i, k in enumerate(nodes)}

    edges = [(idx[NodeKind.SALLY], idx[NodeKind.ANNE])]
    for agent in nodes:
        if agent.is_agent:
            for obj in (NodeKind.BOX, NodeKind.BASKET, NodeKind.TOY):
                edges.append((idx[agent], idx[obj]))
    edges.append((idx[NodeKind.TOY], idx[NodeKind.BOX]))
    edges.append((idx[NodeKind.TOY], idx[NodeKind.BASKET]))

    n = len(nodes)
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    features = np.eye(n)
    adjacency = normalize_adjacency(a)
    features.setflags(write=False)
    adjacency.setflags(write=False)
    return ScenarioGraph(tuple(nodes), tuple(edges), features, adjacency)


def ground_truth_belief(context: Context, agent: NodeKind, semantics: Semantics) -> Belief:
    """Where ``agent`` believes the toy is. The toy starts in the Box."""
    if not agent.is_agent:
        raise ValidationError(f"{agent.value} is not an agent")
    env = context.env
    if semantics is Semantics.BOOLEAN:
        if any(e not in (0.0, 1.0) for e in env):
            raise ValidationError(f"boolean semantics needs 0/1 cues, got {env}")
        sally_present, moved, bob_peeks = (e == 1.0 for e in env)
        observed = {
            NodeKind.SALLY: sally_present,
            NodeKind.ANNE: True,
            NodeKind.BOB: bob_peeks,
        }[agent]
        return Belief.BASKET if moved and observed else Belief.BOX

    sally_present, p_box, moved_evidence = env
    observed = sally_present >= 0.5 if agent is NodeKind.SALLY else True
    return Belief.BASKET if observed and moved_evidence > p_box else Belief.BOX


def enumerate_contexts() -> list[Context]:
    return [Context(bits) for bits in itertools.product((0.0, 1.0), repeat=3)]


@dataclass(frozen=True)
class Trial:
    context: Context
    agent: NodeKind
    label: Belief
    semantics: Semantics

    def __post_init__(self):
        if not self.agent.is_agent:
            raise ValidationError(f"queried node {self.agent.value} is not an agent")

    @property
    def graph(self) -> ScenarioGraph:
        return graph_for(self.semantics)

    def record(self) -> dict:
        return {
            "semantics": self.semantics.value,
            "env": list(self.context.env),
            "load": self.context.load,
            "frame": self.context.frame,
            "agent": self.agent.value,
            "label": self.label.name.capitalize(),
        }


def graph_for(semantics: Semantics) -> ScenarioGraph:
    # Bob only takes part in the generalization test
    return build_graph(include_bob=semantics is Semantics.BOOLEAN)


def oracle_trials(contexts: Iterable[Context], semantics: Semantics,
                  agents: Iterable[NodeKind] | None = None) -> list[Trial]:
    agents = tuple(agents) if agents is not None else graph_for(semantics).agents
    return [
        Trial(c, a, ground_truth_belief(c, a, semantics), semantics)
        for c in contexts
        for a in agents
    ]


# Named evidence-semantics contexts
ANCHOR = Context((1.0, 1.0, 0.0))
CONFLICT = Context((1.0, 0.0, 1.0))
AMBIGUOUS = Context((1.0, 0.5, 0.7))

# Canonical toy-stays-in-the-box situations, varied in presence and certainty.
CANONICAL = (
    ANCHOR,
    Context((0.0, 1.0, 0.0)),
    Context((1.0, 0.9, 0.1)),
    Context((0.0, 0.8, 0.2)),
)
# Situations where the toy clearly or probably moved while Sally watched.
REVISION = (
    CONFLICT,
    Context((1.0, 0.2, 0.9)),
    AMBIGUOUS,
)
# Revision contexts shown under the neutral frame. The ambiguous probe itself
# is held out there; a nearby, clearer context stands in for it.
NEUTRAL_REVISION = (
    CONFLICT,
    Context((1.0, 0.2, 0.9)),
    Context((1.0, 0.3, 0.85)),
)
# Box-labelled contexts just short of the revision boundary.
NEAR_MISS = (
    Context((1.0, 0.6, 0.5)),
    Context((1.0, 0.8, 0.6)),
)

ANCHOR_PRESENTATIONS = 15
CURRICULUM_KINDS = (
    "phase1-canonical",
    "phase2-diverse",
    "phase2-evidence",
    "phase2-habitual",
    "anchor",
    "prime",
    "fatigue",
    "frame",
)


def make_curriculum(kind: str) -> list[Trial]:
    ev = Semantics.EVIDENCE
    sally = (NodeKind.SALLY,)
    if kind == "phase1-canonical":
        trials = oracle_trials(enumerate_contexts(), Semantics.BOOLEAN)
        return [t for t in trials if t.label is Belief.BOX]
    if kind == "phase2-diverse":
        return oracle_trials(enumerate_contexts(), Semantics.BOOLEAN)
    if kind == "phase2-evidence":
        trials = oracle_trials(CANONICAL + NEUTRAL_REVISION, ev)
        trials += oracle_trials([c.with_(frame=-1.0) for c in CANONICAL], ev)
        trials += oracle_trials([c.with_(frame=1.0) for c in REVISION], ev)
        # A negative frame discourages deliberation: the habitual answer is the target.
        trials += [
            Trial(c.with_(frame=-1.0), a, Belief.BOX, ev)
            for c in REVISION for a in graph_for(ev).agents
        ]
        return trials
    if kind == "phase2-habitual":
        return oracle_trials(CANONICAL + NEAR_MISS + (CONFLICT,), ev)
    if kind == "anchor":
        return oracle_trials([ANCHOR] * ANCHOR_PRESENTATIONS, ev, sally)
    if kind == "prime":
        return oracle_trials([AMBIGUOUS, CONFLICT, AMBIGUOUS, AMBIGUOUS], ev, sally)
    if kind == "fatigue":
        easy = Context((1.0, 1.0, 0.0))
        ctxs = [c.with_(load=load) for load in LOAD_GRID for c in (AMBIGUOUS, easy)]
        return oracle_trials(ctxs, ev, sally)
    if kind == "frame":
        return oracle_trials([AMBIGUOUS.with_(frame=f) for f in FRAMES], ev, sally)
    raise ValidationError(f"unknown curriculum {kind!r}; expected one of {CURRICULUM_KINDS}")


LOAD_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


def dump_curriculum(trials: Iterable[Trial]) -> str:
    """One JSON record per line."""
    return "".join(json.dumps(t.record()) + "\n" for t in trials)
