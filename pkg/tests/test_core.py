import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ivcleach.core import (
    ConfigError,
    DeadNodeChargeError,
    Position,
    RadioModel,
    Role,
    SimConfig,
    deduct,
    deploy,
    distance,
    rx_energy,
    tx_energy,
)

from conftest import make_node

coord = st.floats(min_value=0, max_value=1000, allow_nan=False)
points = st.builds(Position, coord, coord)


@pytest.mark.parametrize("a, b, expected", [
    ((0, 0), (0, 0), 0.0),
    ((0, 0), (3, 4), 5.0),
    ((0, 0), (100, 50), 111.80339887),
])
def test_distance_examples(a, b, expected):
    assert distance(Position(*a), Position(*b)) == pytest.approx(expected, abs=1e-8)


@given(points, points, points)
def test_distance_is_a_metric(a, b, c):
    assert distance(a, b) >= 0
    assert distance(a, b) == distance(b, a)
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


def test_default_constants(radio):
    assert radio.e_elec == 50e-9
    assert radio.eps_fs == 10e-12
    assert radio.eps_mp == 0.0013e-12
    assert radio.e_da == 5e-9
    assert (radio.data_bits, radio.ctrl_bits) == (4000, 200)
    assert radio.d0 == pytest.approx(math.sqrt(radio.eps_fs / radio.eps_mp), rel=1e-12)
    assert radio.d0 == pytest.approx(87.7058, abs=1e-4)


def test_tx_energy_examples(radio):
    assert tx_energy(radio, 0, 55.0) == 0.0
    assert tx_energy(radio, 4000, 0.0) == pytest.approx(2.0e-4, rel=1e-12)


def test_tx_energy_continuous_at_crossover(radio):
    d0 = radio.d0
    fs = 4000 * (radio.e_elec + radio.eps_fs * d0**2)
    mp = 4000 * (radio.e_elec + radio.eps_mp * d0**4)
    assert fs == pytest.approx(mp, rel=1e-12)
    assert tx_energy(radio, 4000, d0) == pytest.approx(fs, rel=1e-12)


@given(st.integers(0, 10_000), st.integers(0, 10_000),
       st.floats(0, 300, allow_nan=False), st.floats(0, 300, allow_nan=False))
def test_tx_energy_monotone(b1, b2, d1, d2):
    radio = RadioModel()
    (b1, b2), (d1, d2) = sorted((b1, b2)), sorted((d1, d2))
    assert tx_energy(radio, b1, d1) <= tx_energy(radio, b2, d1) + 1e-18
    assert tx_energy(radio, b1, d1) <= tx_energy(radio, b1, d2) * (1 + 1e-12) + 1e-18


@pytest.mark.parametrize("bits, expected", [(0, 0.0), (4000, 2.0e-4), (200, 1.0e-5)])
def test_rx_energy(radio, bits, expected):
    assert rx_energy(radio, bits) == pytest.approx(expected, rel=1e-12, abs=0)


def test_radio_rejects_nonpositive():
    with pytest.raises(ConfigError, match="eps_fs"):
        RadioModel(eps_fs=0)


@pytest.mark.parametrize("start, cost, residual, alive", [
    (0.5, 0.0, 0.5, True),
    (0.5, 0.2, 0.3, True),
    (0.1, 0.3, 0.0, False),
])
def test_deduct(start, cost, residual, alive):
    node = make_node(0, 1, 1, energy=start)
    node.role = Role.CH
    node.cluster_id = 2
    out = deduct(node, cost)
    assert out.residual_energy == pytest.approx(residual)
    assert out.alive is alive
    if not alive:
        assert out.role is Role.NORMAL and out.cluster_id is None


def test_deduct_dead_node_is_contract_violation():
    node = deduct(make_node(0, 1, 1, energy=0.1), 1.0)
    with pytest.raises(DeadNodeChargeError):
        deduct(node, 0.0)


@given(st.lists(st.floats(0, 0.2, allow_nan=False), max_size=30))
def test_energy_never_negative_and_alive_iff_positive(costs):
    node = make_node(0, 1, 1)
    for c in costs:
        if not node.alive:
            break
        deduct(node, c)
        assert node.residual_energy >= 0
        assert node.residual_energy <= node.initial_energy
        assert node.alive == (node.residual_energy > 0)


def test_deploy_single_node():
    cfg = SimConfig(n_nodes=1, k_clusters=1)
    (node,) = deploy(cfg, np.random.default_rng(1))
    assert 0 <= node.pos.x <= 100 and 0 <= node.pos.y <= 100
    assert node.alive and node.residual_energy == cfg.initial_energy and node.id == 0


def test_deploy_deterministic():
    cfg = SimConfig()
    a = deploy(cfg, np.random.default_rng(42))
    b = deploy(cfg, np.random.default_rng(42))
    assert [n.pos for n in a] == [n.pos for n in b]
    assert [n.id for n in a] == list(range(100))


def test_deploy_law_of_large_numbers():
    cfg = SimConfig(n_nodes=10_000)
    nodes = deploy(cfg, np.random.default_rng(7))
    mx = sum(n.pos.x for n in nodes) / len(nodes)
    my = sum(n.pos.y for n in nodes) / len(nodes)
    # std of the mean is 100/sqrt(12*10000) ~ 0.29 m
    assert abs(mx - 50) < 2 and abs(my - 50) < 2


@pytest.mark.parametrize("kwargs, key", [
    ({"n_nodes": 0, "k_clusters": 1}, "n_nodes"),
    ({"max_rounds": 0}, "max_rounds"),
    ({"k_clusters": 0}, "k_clusters"),
    ({"k_clusters": 101}, "k_clusters"),
    ({"leach_p": 0.0}, "leach_p"),
    ({"leach_p": 1.5}, "leach_p"),
])
def test_config_validation(kwargs, key):
    with pytest.raises(ConfigError) as err:
        SimConfig(**kwargs)
    assert err.value.key == key


def test_config_defaults():
    cfg = SimConfig()
    assert (cfg.n_nodes, cfg.area, cfg.bs_pos, cfg.initial_energy, cfg.max_rounds) == (
        100, (100.0, 100.0), Position(100.0, 50.0), 0.5, 2500
    )
