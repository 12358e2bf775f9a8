import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsehs.model import (
    ExperienceTuple,
    InvalidParams,
    ModelParams,
    PostDecisionState,
    SystemState,
    bernoulli,
    battery_kernel,
    birth_death_channel,
    buffer_cost,
    buffer_kernel,
    cost_table,
    feasible_actions,
    full_kernel,
    goodput_dist,
    next_state,
    pds_of,
    v_max,
)

DEFAULT = ModelParams()


def test_defaults():
    p = ModelParams()
    assert (p.N_b, p.N_e, p.N_h, p.e_TX, p.eta, p.gamma) == (32, 32, 8, 1, 50.0, 0.98)
    assert p.plr[0] == pytest.approx(0.8) and p.plr[-1] == pytest.approx(0.1)
    assert p.harvest_dist == (0.3, 0.7)
    assert p.shape == (33, 33, 8)
    assert np.allclose(p.P_h().sum(axis=1), 1.0)


def test_birth_death_boundaries_keep_mass():
    P = birth_death_channel(4)
    assert P[0, 0] == pytest.approx(0.75)
    assert P[3, 3] == pytest.approx(0.75)
    assert P[1].tolist() == [0.25, 0.5, 0.25, 0.0]


@pytest.mark.parametrize("kw", [
    dict(gamma=1.0),
    dict(gamma=-0.1),
    dict(eta=-1.0),
    dict(e_TX=33),
    dict(e_TX=0),
    dict(N_h=2, plr=(0.1, 0.5)),
    dict(N_h=2, plr=(0.5, 0.5)),
    dict(arrival_dist=(0.5, 0.4)),
    dict(harvest_dist=(0.3, 0.7 + 1e-9)),
    dict(N_h=2, channel_matrix=((0.5, 0.5), (0.4, 0.5))),
    dict(N_h=2, plr=(0.5,)),
])
def test_invalid_params(kw):
    with pytest.raises(InvalidParams):
        ModelParams(**kw)


def test_replace_resets_channel_defaults():
    p = DEFAULT.replace(N_h=3)
    assert len(p.plr) == 3 and len(p.channel_matrix) == 3


@pytest.mark.parametrize("b,e,expected", [(0, 5, (0,)), (3, 0, (0,)), (3, 2, (0, 1))])
def test_feasible_actions(b, e, expected):
    assert feasible_actions(b, e, DEFAULT) == expected


def test_goodput_dist():
    p = ModelParams(N_h=2, plr=(0.8, 0.1))
    assert goodput_dist(0, 1, p) == (1.0, 0.0)
    assert goodput_dist(1, 1, p) == pytest.approx((0.1, 0.9))
    assert goodput_dist(1, 0, p) == pytest.approx((0.8, 0.2))


def test_pds_of():
    assert pds_of(SystemState(5, 3, 2), 1, 1, DEFAULT) == (4, 2, 2)
    assert pds_of(SystemState(5, 3, 2), 0, 0, DEFAULT) == (5, 3, 2)
    assert pds_of(SystemState(1, 2, 0), 1, 0, DEFAULT.replace(e_TX=2)) == (1, 0, 0)
    with pytest.raises(ValueError):
        pds_of(SystemState(0, 3, 0), 1, 1, DEFAULT)
    with pytest.raises(ValueError):
        pds_of(SystemState(3, 3, 0), 0, 1, DEFAULT)


def test_next_state():
    assert next_state(PostDecisionState(4, 2, 0), ExperienceTuple(1, 1, 3), DEFAULT) == (5, 3, 3)
    assert next_state(PostDecisionState(32, 2, 5), ExperienceTuple(1, 0, 0), DEFAULT) == (32, 2, 0)
    assert next_state(PostDecisionState(0, 32, 5), ExperienceTuple(0, 1, 1), DEFAULT) == (0, 32, 1)


def test_buffer_cost():
    assert buffer_cost(2, 0, 0, DEFAULT) == 2.0
    assert buffer_cost(2, 0, 1, DEFAULT) == 2.0
    small = ModelParams(N_b=2, N_e=2, N_h=1, plr=(0.0,), arrival_dist=bernoulli(0.5), eta=50.0)
    assert buffer_cost(2, 0, 0, small) == pytest.approx(27.0)
    assert buffer_cost(2, 0, 1, small) == pytest.approx(2.0)


def test_buffer_kernel():
    p = ModelParams(arrival_dist=bernoulli(0.4))
    k = buffer_kernel(0, 0, 0, p)
    assert k[0] == pytest.approx(0.6) and k[1] == pytest.approx(0.4)
    q = ModelParams(N_h=1, plr=(0.5,), arrival_dist=(1.0,))
    k = buffer_kernel(1, 0, 1, q)
    assert k[0] == pytest.approx(0.5) and k[1] == pytest.approx(0.5)
    k = buffer_kernel(p.N_b, 3, 0, p)
    assert k[p.N_b] == pytest.approx(1.0)


def test_battery_kernel():
    k = battery_kernel(DEFAULT.N_e, 0, DEFAULT)
    assert k[DEFAULT.N_e] == pytest.approx(1.0)
    k = battery_kernel(1, 1, DEFAULT)
    assert k[0] == pytest.approx(0.3) and k[1] == pytest.approx(0.7)
    k = battery_kernel(5, 0, DEFAULT.replace(harvest_dist=(1.0,)))
    assert k[5] == 1.0


def test_full_kernel_deterministic_submodel():
    p = ModelParams(N_b=5, N_e=5, N_h=1, plr=(0.0,), arrival_dist=(1.0,), harvest_dist=(1.0,))
    assert full_kernel(SystemState(3, 2, 0), 1, p) == {SystemState(2, 1, 0): 1.0}


def test_full_kernel_hand_enumeration():
    p = ModelParams(N_b=1, N_e=1, N_h=1, plr=(0.25,), arrival_dist=bernoulli(0.5),
                    harvest_dist=bernoulli(0.5))
    k = full_kernel(SystemState(1, 1, 0), 1, p)
    # f=1 w.p. 0.75 then b' = l; f=0 then b' = 1 always
    expected = {
        SystemState(0, 0, 0): 0.75 * 0.5 * 0.5,
        SystemState(0, 1, 0): 0.75 * 0.5 * 0.5,
        SystemState(1, 0, 0): (0.75 * 0.5 + 0.25) * 0.5,
        SystemState(1, 1, 0): (0.75 * 0.5 + 0.25) * 0.5,
    }
    assert k.keys() == expected.keys()
    for s, v in expected.items():
        assert k[s] == pytest.approx(v)


models = st.builds(
    lambda nb, ne, nh, p_l, p_e, etx: ModelParams(N_b=nb, N_e=ne, N_h=nh, e_TX=min(etx, ne),
                                                  arrival_dist=bernoulli(p_l), harvest_dist=bernoulli(p_e)),
    st.integers(1, 6), st.integers(1, 6), st.integers(1, 3),
    st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(1, 2),
)


@settings(max_examples=40, deadline=None)
@given(models, st.data())
def test_kernel_is_stochastic(p, data):
    b = data.draw(st.integers(0, p.N_b))
    e = data.draw(st.integers(0, p.N_e))
    h = data.draw(st.integers(0, p.N_h - 1))
    for a in feasible_actions(b, e, p):
        k = full_kernel(SystemState(b, e, h), a, p)
        assert sum(k.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(0 <= s.b <= p.N_b and 0 <= s.e <= p.N_e for s in k)


@settings(max_examples=30, deadline=None)
@given(models)
def test_cost_table_bounds(p):
    c = cost_table(p)
    assert np.all(np.isinf(c[0, :, :, 1]))
    assert np.all(np.isinf(c[:, : p.e_TX, :, 1]))
    finite = c[np.isfinite(c)]
    assert finite.min() >= 0
    assert v_max(p) == pytest.approx(finite.max() / (1 - p.gamma))
