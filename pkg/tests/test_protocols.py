import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ivcleach.core import (
    DeadNodeChargeError,
    FailureInjection,
    Position,
    Protocol,
    Role,
    SimConfig,
)
from ivcleach.election import RoleEntry
from ivcleach.engine import run
from ivcleach.protocols import (
    EnergyLedger,
    EventKind,
    LeachState,
    RoundPlan,
    ivc_configuration,
    ivc_steady_state,
    leach_elect,
    leach_steady_state,
    leach_threshold,
)

from conftest import make_node


def E(bits, d2):
    """Free-space transmit energy, written out independently of the package."""
    return bits * (50e-9 + 1e-11 * d2)


def RX(bits):
    return bits * 50e-9


AGG = 5e-9 * 4000
DATA, CTRL = 4000, 200


def kinds(ledger):
    return [e.kind for e in ledger.events]


# -- LEACH election -----------------------------------------------------------

def _grid(n):
    return [make_node(i, (i % 10) * 10 + 5, (i // 10) * 10 + 5) for i in range(n)]


def test_threshold_values():
    assert leach_threshold(0.05, 0) == pytest.approx(0.05)
    assert leach_threshold(0.05, 19) == pytest.approx(1.0)
    assert leach_threshold(0.05, 20) == pytest.approx(0.05)


def test_leach_all_heads_when_p_is_one():
    nodes = _grid(10)
    plan = leach_elect(nodes, 0, 1.0, np.random.default_rng(0), LeachState())
    assert plan.ch_count == 10 and plan.direct == []
    assert all(n.role is Role.CH for n in nodes)


def test_leach_no_eligible_nodes_go_direct():
    nodes = _grid(10)
    state = LeachState(served=set(range(10)))
    plan = leach_elect(nodes, 3, 0.05, np.random.default_rng(0), state)
    assert plan.ch_count == 0
    assert plan.direct == list(range(10))


def test_leach_mean_head_count():
    nodes = _grid(100)
    rng, state = np.random.default_rng(12), LeachState()
    counts = [leach_elect(nodes, r, 0.05, rng, state).ch_count for r in range(1000)]
    assert 4 <= np.mean(counts) <= 6


def test_leach_members_join_nearest_head():
    nodes = _grid(30)
    plan = leach_elect(nodes, 0, 0.2, np.random.default_rng(1), LeachState())
    heads = [e.ch for e in plan.role_table]
    for entry, slots in zip(plan.role_table, plan.tdma):
        for m in slots:
            p = nodes[m].pos
            d = [((p.x - nodes[h].pos.x) ** 2 + (p.y - nodes[h].pos.y) ** 2, h) for h in heads]
            assert min(d)[1] == entry.ch


# -- LEACH steady state -------------------------------------------------------

def _leach_cluster():
    # CH 0 sits 60 m from the BS; members 10 m away in a cross
    nodes = [make_node(0, 40, 50), make_node(1, 30, 50), make_node(2, 50, 50),
             make_node(3, 40, 40), make_node(4, 40, 60)]
    plan = RoundPlan(Protocol.LEACH, [RoleEntry(0, ch=0)], [[1, 2, 3, 4]])
    return nodes, plan


def test_leach_steady_state_one_cluster():
    nodes, plan = _leach_cluster()
    cfg = SimConfig(n_nodes=5, k_clusters=1)
    ledger = EnergyLedger(round=1)
    assert leach_steady_state(plan, nodes, cfg, ledger) == 1
    assert 0.5 - nodes[1].residual_energy == pytest.approx(E(DATA, 100), abs=1e-15)
    ch_cost = 4 * RX(DATA) + 4 * AGG + E(DATA, 3600)
    assert 0.5 - nodes[0].residual_energy == pytest.approx(ch_cost, abs=1e-15)
    assert ledger.total == pytest.approx(ch_cost + 4 * E(DATA, 100), abs=1e-15)


def test_leach_all_direct():
    nodes = [make_node(0, 40, 50), make_node(1, 100, 20)]
    plan = RoundPlan(Protocol.LEACH, [], [], direct=[0, 1])
    ledger = EnergyLedger(round=1)
    assert leach_steady_state(plan, nodes, SimConfig(n_nodes=2, k_clusters=1), ledger) == 2
    assert 0.5 - nodes[1].residual_energy == pytest.approx(E(DATA, 900), abs=1e-15)


def test_leach_head_killed_mid_schedule():
    nodes, plan = _leach_cluster()
    ledger = EnergyLedger(round=1)
    kills = FailureInjection.scripted([(1, 0, 2)])
    assert leach_steady_state(plan, nodes, SimConfig(n_nodes=5, k_clusters=1), ledger, kills) == 0
    assert ledger.tx == pytest.approx(4 * E(DATA, 100), abs=1e-15)
    assert ledger.rx == pytest.approx(2 * RX(DATA), abs=1e-15)
    assert ledger.failure == pytest.approx(0.5 - 2 * RX(DATA), abs=1e-15)
    assert EventKind.DELIVERY_TO_BS not in kinds(ledger)


# -- IVC configuration ---------------------------------------------------------

def test_ivc_configuration_single_node():
    nodes = [make_node(0, 50, 50)]
    plan = ivc_configuration(nodes, SimConfig(n_nodes=1, k_clusters=1), None,
                             np.random.default_rng(0), EnergyLedger(round=1))
    assert plan.role_table == [RoleEntry(0, ch=0)]
    assert plan.tdma == [[]]
    assert nodes[0].role is Role.CH


def test_ivc_round_one_ledger_closed_form():
    xy = [(60, 50), (50, 50), (55, 55), (50, 60), (40, 50), (70, 30)]
    nodes = [make_node(i, x, y) for i, (x, y) in enumerate(xy)]
    ledger = EnergyLedger(round=1)
    ivc_configuration(nodes, SimConfig(n_nodes=6, k_clusters=2), None,
                      np.random.default_rng(0), ledger)
    expected_tx = sum(E(CTRL, (100 - x) ** 2 + (50 - y) ** 2) for x, y in xy)
    assert ledger.tx == pytest.approx(expected_tx, abs=1e-15)
    assert ledger.rx == pytest.approx(6 * RX(CTRL), abs=1e-15)
    # no status report after the first configuration
    ledger2 = EnergyLedger(round=2)
    plan = ivc_configuration(nodes, SimConfig(n_nodes=6, k_clusters=2), [RoleEntry(0, ch=0)],
                             np.random.default_rng(0), ledger2)
    assert ledger2.tx == 0.0 and ledger2.rx == pytest.approx(6 * RX(CTRL), abs=1e-15)
    assert nodes[0].was_ch_prev_round and not nodes[1].was_ch_prev_round
    for entry, slots in zip(plan.role_table, plan.tdma):
        assert entry.ch not in slots and entry.chsec not in slots


def test_status_report_can_exhaust_a_node():
    nodes = [make_node(0, 60, 50), make_node(1, 50, 50), make_node(2, 0, 0, energy=1e-9)]
    plan = ivc_configuration(nodes, SimConfig(n_nodes=3, k_clusters=1), None,
                             np.random.default_rng(0), EnergyLedger(round=1))
    assert not nodes[2].alive
    assert 2 not in plan.assignment.labels
    assert 2 not in plan.role_table[0].leaders()


# -- IVC steady state on a hand-traced cluster ---------------------------------

@pytest.fixture
def cluster():
    # CH 0, CHsec 1, CHv 2, CHsecv 3, Normal 4; BS at (100, 50)
    xy = [(60, 50), (50, 50), (55, 55), (50, 60), (40, 50)]
    nodes = [make_node(i, x, y) for i, (x, y) in enumerate(xy)]
    plan = RoundPlan(Protocol.IVC, [RoleEntry(0, ch=0, chsec=1, chv=2, chsecv=3)], [[2, 3, 4]])
    return nodes, plan, SimConfig(n_nodes=5, k_clusters=1)


def spent(nodes):
    return [0.5 - n.residual_energy for n in nodes]


def test_ivc_nominal_round(cluster):
    nodes, plan, cfg = cluster
    ledger = EnergyLedger(round=1)
    assert ivc_steady_state(plan, nodes, cfg, ledger) == 1
    assert kinds(ledger) == [EventKind.DELIVERY_TO_BS]
    expected = [
        RX(CTRL) + E(CTRL, 100) + RX(DATA) + E(DATA, 1600),
        3 * RX(DATA) + E(CTRL, 50) + 2 * E(CTRL, 100) + 3 * AGG
        + E(CTRL, 100) + RX(CTRL) + E(DATA, 100),
        E(DATA, 50) + RX(CTRL),
        E(DATA, 100) + RX(CTRL),
        E(DATA, 100) + RX(CTRL),
    ]
    assert spent(nodes) == pytest.approx(expected, abs=1e-15)
    assert ledger.total == pytest.approx(sum(expected), abs=1e-15)


def test_ivc_ch_failover(cluster):
    nodes, plan, cfg = cluster
    ledger = EnergyLedger(round=1)
    kills = FailureInjection.scripted([(1, 0, 99)])
    assert ivc_steady_state(plan, nodes, cfg, ledger, kills) == 1
    evs = [e for e in ledger.events if e.kind is not EventKind.NODE_DIED]
    assert [e.kind for e in evs] == [EventKind.CH_FAILOVER, EventKind.DELIVERY_TO_BS]
    assert evs[1].detail == "head=2"
    # CHv: data and live message in its own slot, then ACK, fused packet, uplink
    chv = E(DATA, 50) + RX(CTRL) + RX(CTRL) + E(CTRL, 50) + RX(DATA) + E(DATA, 45**2 + 5**2)
    assert spent(nodes)[2] == pytest.approx(chv, abs=1e-15)


def test_ivc_chsec_failover(cluster):
    nodes, plan, cfg = cluster
    ledger = EnergyLedger(round=1)
    kills = FailureInjection.scripted([(1, 1, 1)])
    assert ivc_steady_state(plan, nodes, cfg, ledger, kills) == 1
    assert EventKind.CHSEC_FAILOVER in kinds(ledger)
    assert EventKind.CH_FAILOVER not in kinds(ledger)
    # CHsecv: wasted send to the dead CHsec, then collects node 4 and hands over to CH
    chsecv = (E(DATA, 100) + RX(DATA) + E(CTRL, 200) + AGG
              + E(CTRL, 100 + 100) + RX(CTRL) + E(DATA, 200))
    assert spent(nodes)[3] == pytest.approx(chsecv, abs=1e-15)
    assert spent(nodes)[4] == pytest.approx(E(DATA, 100 + 100) + RX(CTRL), abs=1e-15)


def test_ivc_all_leaders_dead(cluster):
    nodes, plan, cfg = cluster
    ledger = EnergyLedger(round=1)
    kills = FailureInjection.scripted([(1, i, 0) for i in range(4)])
    assert ivc_steady_state(plan, nodes, cfg, ledger, kills) == 0
    assert EventKind.CLUSTER_ISOLATED in kinds(ledger)
    assert ledger.charged == 0.0
    assert nodes[4].residual_energy == 0.5


def test_ivc_rejects_leader_in_schedule(cluster):
    nodes, plan, cfg = cluster
    plan.tdma = [[0, 4]]
    with pytest.raises(ValueError):
        ivc_steady_state(plan, nodes, cfg, EnergyLedger(round=1))


def test_dead_node_charge_is_error():
    ledger = EnergyLedger(round=1)
    node = make_node(0, 0, 0)
    ledger.fail(node)
    with pytest.raises(DeadNodeChargeError):
        ledger.charge(node, 1e-6, "tx")


@settings(max_examples=12, deadline=None)
@given(st.integers(5, 20), st.integers(0, 2**32 - 1), st.sampled_from(list(Protocol)),
       st.sampled_from([0.0, 0.02]))
def test_energy_conservation_property(n, seed, protocol, fail_prob):
    cfg = SimConfig(n_nodes=n, k_clusters=min(3, n), max_rounds=50, seed=seed,
                    protocol=protocol, initial_energy=0.01,
                    failure_injection=FailureInjection.probabilistic(fail_prob))
    result = run(cfg)  # raises ConservationError on any mismatch
    for m in result.metrics:
        assert m.total_residual >= 0
    alive = [m.alive for m in result.metrics]
    assert alive == sorted(alive, reverse=True)
