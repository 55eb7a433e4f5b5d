import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualmind import tensor as T
from dualmind.scenario import NodeKind, build_graph
from dualmind.system1 import (
    DimsConfig, flat_values, flatten_params, forward_system1, init_system1, unflatten_params,
)
from dualmind.tensor import Tensor

from gradcheck import max_gradient_error

GRAPH = build_graph(include_bob=True)


def fresh(seed=0, **kw):
    dims = DimsConfig.for_graph(GRAPH, **kw)
    return dims, init_system1(dims, np.random.default_rng(seed))


def test_parameter_count_from_block_shapes():
    dims, params = fresh()
    by_hand = 6 * 16 + (16 + 8) * 16 + 16 + 16 * 2 + 2 + 3 * 8
    assert dims.num_params == by_hand == flat_values(params).size


def test_without_bob_there_is_one_fewer_meta_vector():
    dims = DimsConfig.for_graph(build_graph(include_bob=False))
    assert dims.num_params == 5 * 16 + 24 * 16 + 16 + 32 + 2 + 2 * 8


@given(hidden=st.integers(1, 6), meta=st.integers(1, 5), head=st.integers(1, 6), seed=st.integers(0, 99))
@settings(max_examples=20, deadline=None)
def test_flatten_roundtrip(hidden, meta, head, seed):
    dims, params = fresh(seed, hidden_dim=hidden, meta_dim=meta, head_hidden=head)
    back = unflatten_params(flatten_params(params), dims)
    for a, b in zip(params.weights() + params.meta_vectors(), back.weights() + back.meta_vectors()):
        assert np.array_equal(a.data, b.data)


def test_unflatten_rejects_wrong_length():
    dims, _ = fresh()
    with pytest.raises(T.ShapeError):
        unflatten_params(Tensor(np.zeros(dims.num_params + 1)), dims)


def test_meta_slice_addresses_the_agent_vector():
    dims, params = fresh()
    flat = flat_values(params)
    for agent in dims.agents:
        assert np.array_equal(flat[dims.meta_slice(agent)], params.meta[agent].data)


def test_forward_matches_numpy_reference():
    _, p = fresh(3)
    i = GRAPH.index(NodeKind.ANNE)
    h = np.maximum(GRAPH.adjacency @ GRAPH.features @ p.w_gcn.data, 0)[i]
    z = np.maximum(np.concatenate([h, p.meta[NodeKind.ANNE].data]) @ p.w1.data + p.b1.data, 0)
    ref = z @ p.w2.data + p.b2.data
    np.testing.assert_allclose(forward_system1(GRAPH, NodeKind.ANNE, p).data, ref, rtol=1e-13)


@pytest.mark.parametrize("agent", [NodeKind.SALLY, NodeKind.ANNE, NodeKind.BOB])
def test_gradients_through_the_flat_vector(agent):
    dims, p = fresh(1, hidden_dim=4, meta_dim=3, head_hidden=4)
    flat = Tensor(flat_values(p), requires_grad=True)
    fn = lambda: T.cross_entropy(forward_system1(GRAPH, agent, unflatten_params(flat, dims)), 1)
    assert max_gradient_error(fn, [flat]) < 1e-6


def test_meta_off_hides_meta_parameters():
    _, p = fresh(2)
    before = forward_system1(GRAPH, NodeKind.SALLY, p, use_meta=False).data.copy()
    p.meta[NodeKind.SALLY].data += 5.0
    after = forward_system1(GRAPH, NodeKind.SALLY, p, use_meta=False).data
    assert np.array_equal(before, after)
    assert not np.array_equal(after, forward_system1(GRAPH, NodeKind.SALLY, p).data)


def test_objects_cannot_be_queried():
    _, p = fresh()
    with pytest.raises(LookupError):
        forward_system1(GRAPH, NodeKind.TOY, p)
    with pytest.raises(LookupError):
        forward_system1(build_graph(include_bob=False), NodeKind.BOB, p)


@pytest.mark.parametrize("kw", [{"hidden_dim": 0}, {"meta_dim": -1}, {"num_classes": 3}])
def test_dims_validation(kw):
    with pytest.raises(ValueError):
        DimsConfig.for_graph(GRAPH, **kw)


def test_dims_dict_roundtrip():
    dims = DimsConfig.for_graph(GRAPH, hidden_dim=7)
    assert DimsConfig.from_dict(dims.to_dict()) == dims
