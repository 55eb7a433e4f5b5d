"""Model state (System 1, controller, gate), variant switches and checkpoints."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arbiter import GateParams, init_gate
from .scenario import ScenarioGraph, build_graph
from .system1 import DimsConfig, System1Params, flat_values, init_system1
from .system2 import ControllerParams, init_controller
from .tensor import Tensor

CHECKPOINT_FORMAT = "dualmind-checkpoint"
CHECKPOINT_VERSION = 1

# variant -> (use_meta, use_controller, fixed gate or None)
VARIANTS = {
    "full": (True, True, None),
    "no-meta": (False, True, None),
    "meta-only": (True, False, None),
    "controller-only": (False, True, 1.0),
    # the baseline list's extra names, expressed through the gate switch
    "system2-disabled": (True, True, 0.0),
    "system2-only": (True, True, 1.0),
}
VARIANT_ALIASES = {
    "system1-only": "system2-disabled",
}


def resolve_variant(name: str) -> str:
    name = VARIANT_ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}")
    return name


def split_seed(seed: int) -> dict[str, int]:
    """Per-component init seeds derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    keys = ("system1", "controller", "gate")
    return {k: int(c.generate_state(1, dtype=np.uint64)[0]) for k, c in zip(keys, children)}


@dataclass
class ModelState:
    graph: ScenarioGraph
    dims: DimsConfig
    theta: System1Params
    phi: ControllerParams
    psi: GateParams
    variant: str = "full"
    seed: int = 0
    pretrained: bool = False
    snapshot: np.ndarray | None = None
    seeds: dict[str, int] = field(default_factory=dict)

    @property
    def use_meta(self) -> bool:
        return VARIANTS[self.variant][0]

    @property
    def use_controller(self) -> bool:
        return VARIANTS[self.variant][1]

    @property
    def gate_fixed(self) -> float | None:
        return VARIANTS[self.variant][2]

    def controller_input_params(self) -> np.ndarray:
        """Frozen phase-1 parameter vector fed to the controller."""
        return self.snapshot if self.snapshot is not None else flat_values(self.theta)

    def freeze_snapshot(self) -> None:
        self.snapshot = flat_values(self.theta).copy()

    def system1_tensors(self, include_meta: bool = True) -> list[Tensor]:
        out = self.theta.weights()
        if include_meta and self.use_meta:
            out = out + self.theta.meta_vectors()
        return out

    def checksums(self) -> dict[str, str]:
        return {
            "theta": digest(self.theta.weights()),
            "meta": digest(self.theta.meta_vectors()),
            "controller": digest(self.phi.tensors()),
            "gate": digest(self.psi.tensors()),
        }


def digest(tensors) -> str:
    h = hashlib.sha256()
    for t in tensors:
        h.update(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    return h.hexdigest()


def new_model(graph: ScenarioGraph | None = None, seed: int = 0, variant: str = "full",
              delta_bound: float | None = None, gate_bias: float | None = None, **dims_kw) -> ModelState:
    graph = graph if graph is not None else build_graph(include_bob=True)
    variant = resolve_variant(variant)
    dims = DimsConfig.for_graph(graph, **dims_kw)
    seeds = split_seed(seed)
    theta = init_system1(dims, np.random.default_rng(seeds["system1"]))
    if not VARIANTS[variant][0]:
        for a, m in theta.meta.items():
            theta.meta[a] = Tensor(np.zeros(m.shape))
    phi = init_controller(dims.num_params, np.random.default_rng(seeds["controller"]), bound=delta_bound)
    psi = init_gate(np.random.default_rng(seeds["gate"]))
    if gate_bias is not None:
        psi.b2.data[:] = gate_bias
    return ModelState(graph, dims, theta, phi, psi, variant=variant, seed=seed, seeds=seeds)


# ---------------------------------------------------------------- checkpoints


def _arr(t: Tensor) -> dict:
    return {"shape": list(t.shape), "values": t.data.reshape(-1).tolist()}


def _tensor(d: dict, requires_grad: bool = True) -> Tensor:
    return Tensor(np.array(d["values"], dtype=np.float64).reshape(d["shape"]), requires_grad=requires_grad)


def checkpoint_dict(model: ModelState) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dims": model.dims.to_dict(),
        "roster": [k.value for k in model.graph.nodes],
        "variant": model.variant,
        "seed": model.seed,
        "seeds": model.seeds,
        "pretrained": model.pretrained,
        "system1": flat_values(model.theta).tolist(),
        "snapshot": None if model.snapshot is None else model.snapshot.tolist(),
        "controller": {
            "w1": _arr(model.phi.w1), "b1": _arr(model.phi.b1),
            "w2": _arr(model.phi.w2), "b2": _arr(model.phi.b2),
            "bound": model.phi.bound,
        },
        "gate": {
            "w1": _arr(model.psi.w1), "b1": _arr(model.psi.b1),
            "w2": _arr(model.psi.w2), "b2": _arr(model.psi.b2),
            "kappa": model.psi.kappa,
        },
    }


def save_checkpoint(model: ModelState, path) -> str:
    """Write a JSON checkpoint; floats use repr so values round-trip exactly."""
    text = json.dumps(checkpoint_dict(model), indent=1)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_checkpoint(path) -> ModelState:
    d = json.loads(Path(path).read_text())
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('version')}")
    dims = DimsConfig.from_dict(d["dims"])
    graph = build_graph(include_bob="Bob" in d["roster"])
    if [k.value for k in graph.nodes] != d["roster"]:
        raise ValueError(f"unknown roster {d['roster']}")
    variant = resolve_variant(d["variant"])
    flat = np.array(d["system1"], dtype=np.float64)
    theta = params_from_flat(flat, dims, meta_trainable=VARIANTS[variant][0])
    c, g = d["controller"], d["gate"]
    phi = ControllerParams(_tensor(c["w1"]), _tensor(c["b1"]), _tensor(c["w2"]), _tensor(c["b2"]),
                           bound=c["bound"])
    psi = GateParams(_tensor(g["w1"]), _tensor(g["b1"]), _tensor(g["w2"]), _tensor(g["b2"]),
                     kappa=g["kappa"])
    snap = None if d["snapshot"] is None else np.array(d["snapshot"], dtype=np.float64)
    return ModelState(graph, dims, theta, phi, psi, variant=variant, seed=d["seed"],
                      pretrained=d["pretrained"], snapshot=snap, seeds=d["seeds"])


def params_from_flat(flat: np.ndarray, dims: DimsConfig, meta_trainable: bool = True) -> System1Params:
    if flat.shape != (dims.num_params,):
        raise ValueError(f"expected {dims.num_params} values, got {flat.shape}")
    out = {}
    start = 0
    for name, shape in dims.blocks():
        size = int(np.prod(shape))
        trainable = meta_trainable or not name.startswith("meta:")
        out[name] = Tensor(flat[start:start + size].reshape(shape), requires_grad=trainable)
        start += size
    meta = {a: out.pop(f"meta:{a.value}") for a in dims.agents}
    return System1Params(meta=meta, **out)
