"""Per-round protocol state machines and their energy accounting.

Every joule leaves a node through :meth:`EnergyLedger.charge` (radio and
aggregation costs) or :meth:`EnergyLedger.fail` (injected failures), so the
per-round drop in network energy can be reconciled exactly against the ledger.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    DeadNodeChargeError,
    FailureInjection,
    NodeRecord,
    Position,
    Protocol,
    Role,
    SimConfig,
    deduct,
    distance,
    kill,
    rx_energy,
    tx_energy,
)
from .election import ClusterAssignment, RoleEntry, RoleTable, configure_round

# Sentinel receiver id for the base station.
BS = -1

_ROLE_OF = {"ch": Role.CH, "chsec": Role.CHSEC, "chv": Role.CHV, "chsecv": Role.CHSECV}


class EventKind(str, enum.Enum):
    NODE_DIED = "NodeDied"
    CH_FAILOVER = "ChFailover"
    CHSEC_FAILOVER = "ChsecFailover"
    DELIVERY_TO_BS = "DeliveryToBS"
    CLUSTER_ISOLATED = "ClusterIsolated"


@dataclass(frozen=True)
class RoundEvent:
    round: int
    kind: EventKind
    subject: int
    detail: str = ""


@dataclass
class EnergyLedger:
    """Running tally of the energy removed from nodes during one round."""

    round: int
    events: list = field(default_factory=list)
    tx: float = 0.0
    rx: float = 0.0
    aggregation: float = 0.0
    failure: float = 0.0

    @property
    def charged(self) -> float:
        return self.tx + self.rx + self.aggregation

    @property
    def total(self) -> float:
        return self.charged + self.failure

    def charge(self, node: NodeRecord, cost: float, kind: str) -> bool:
        """Charge ``cost`` to a live node; returns whether it survived."""
        if not node.alive:
            raise DeadNodeChargeError(f"round {self.round}: node {node.id} charged while dead")
        applied = cost if cost < node.residual_energy else node.residual_energy
        if kind == "tx":
            self.tx += applied
        elif kind == "rx":
            self.rx += applied
        else:
            self.aggregation += applied
        deduct(node, cost)
        if not node.alive:
            self.events.append(RoundEvent(self.round, EventKind.NODE_DIED, node.id, "energy"))
        return node.alive

    def fail(self, node: NodeRecord) -> None:
        if not node.alive:
            return
        self.failure += node.residual_energy
        kill(node)
        self.events.append(RoundEvent(self.round, EventKind.NODE_DIED, node.id, "failure"))

    def emit(self, kind: EventKind, subject: int, detail: str = "") -> None:
        self.events.append(RoundEvent(self.round, kind, subject, detail))


class _Radio:
    """Point-to-point transmissions between nodes and the BS, charged to a ledger."""

    def __init__(self, nodes: Sequence[NodeRecord], config: SimConfig, ledger: EnergyLedger):
        self.nodes = nodes
        self.model = config.radio
        self.bs = config.bs_pos
        self.ledger = ledger

    def send(self, sender: int, receiver: int, bits: int) -> bool:
        """Transmit from ``sender``; True when the receiver got the packet.

        A dead sender transmits nothing. A dead receiver costs the sender its
        transmission and receives nothing. A receiver drained by the reception
        still gets the packet.
        """
        src = self.nodes[sender]
        if not src.alive:
            return False
        dst_pos = self.bs if receiver == BS else self.nodes[receiver].pos
        self.ledger.charge(src, tx_energy(self.model, bits, distance(src.pos, dst_pos)), "tx")
        if receiver == BS:
            return True
        dst = self.nodes[receiver]
        if not dst.alive:
            return False
        self.ledger.charge(dst, rx_energy(self.model, bits), "rx")
        return True

    def aggregate(self, node: int, signals: int) -> None:
        n = self.nodes[node]
        if signals > 0 and n.alive:
            self.ledger.charge(n, self.model.e_da * self.model.data_bits * signals, "aggregation")


class _Failures:
    """Applies a :class:`FailureInjection` for one round."""

    def __init__(self, failures: FailureInjection, round_no: int, nodes, ledger, rng):
        self.nodes = nodes
        self.ledger = ledger
        self.pending = {}
        if failures.mode == "scripted":
            for rnd, node, slot in failures.kills:
                if rnd == round_no:
                    self.pending.setdefault(node, slot)
        elif failures.mode == "probabilistic":
            draws = rng.random(len(nodes))
            for node in nodes:
                if node.alive and draws[node.id] < failures.prob:
                    self.pending[node.id] = 0

    def at_start(self) -> None:
        for node_id, slot in sorted(self.pending.items()):
            if slot == 0:
                self.ledger.fail(self.nodes[node_id])

    def at_slot(self, cluster_nodes, slots_done: int) -> None:
        if not self.pending or slots_done == 0:
            return
        for node_id in cluster_nodes:
            if self.pending.get(node_id, 0) == slots_done and slots_done > 0:
                self.ledger.fail(self.nodes[node_id])

    def after_schedule(self, cluster_nodes, n_slots: int) -> None:
        if not self.pending:
            return
        for node_id in cluster_nodes:
            slot = self.pending.get(node_id, 0)
            if slot > n_slots or (slot == n_slots and slot > 0):
                self.ledger.fail(self.nodes[node_id])

    def at_end(self) -> None:
        for node_id in sorted(self.pending):
            self.ledger.fail(self.nodes[node_id])


@dataclass
class RoundPlan:
    """What the nodes were told at the end of configuration/election.

    For IVC ``role_table`` holds one :class:`RoleEntry` per cluster. For LEACH
    ``role_table`` holds ``RoleEntry(ch=...)`` per elected CH and ``direct``
    lists nodes without a CH, which send straight to the BS. ``tdma[c]`` is the
    ordered slot list of cluster ``c``.
    """

    protocol: Protocol
    role_table: RoleTable
    tdma: list[list[int]]
    assignment: Optional[ClusterAssignment] = None
    values: Optional[dict] = None
    direct: list[int] = field(default_factory=list)

    @property
    def ch_count(self) -> int:
        return len(self.role_table)


# -- LEACH ---------------------------------------------------------------------


@dataclass
class LeachState:
    """Per-epoch eligibility: ids that have served as CH in the current epoch."""

    served: set = field(default_factory=set)


def leach_period(p: float) -> int:
    return max(1, math.ceil(1.0 / p - 1e-9))


def leach_threshold(p: float, round_index: int) -> float:
    period = leach_period(p)
    return p / (1.0 - p * (round_index % period))


def leach_elect(
    nodes: Sequence[NodeRecord],
    round_index: int,
    p: float,
    rng: np.random.Generator,
    state: LeachState,
) -> RoundPlan:
    """Randomised CH self-election with epoch rotation; ``round_index`` counts from 0.

    Every node draws once per round (dead or not) so the election stream
    stays aligned across runs. Non-CH nodes join the nearest CH.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if round_index % leach_period(p) == 0:
        state.served.clear()
    threshold = leach_threshold(p, round_index)
    draws = rng.random(len(nodes))
    heads = [
        n.id for n in nodes if n.alive and n.id not in state.served and draws[n.id] < threshold
    ]
    state.served.update(heads)

    members: dict[int, list[int]] = {h: [] for h in heads}
    direct = []
    for n in nodes:
        if not n.alive or n.id in members:
            continue
        if not heads:
            direct.append(n.id)
            continue
        nearest = min(heads, key=lambda h: (distance(n.pos, nodes[h].pos), h))
        members[nearest].append(n.id)

    for n in nodes:
        if n.alive:
            n.role = Role.NORMAL
            n.cluster_id = None
    role_table = []
    for c, h in enumerate(heads):
        nodes[h].role = Role.CH
        nodes[h].cluster_id = c
        for m in members[h]:
            nodes[m].cluster_id = c
        role_table.append(RoleEntry(cluster=c, ch=h))
    return RoundPlan(
        protocol=Protocol.LEACH,
        role_table=role_table,
        tdma=[sorted(members[h]) for h in heads],
        direct=direct,
    )


def leach_steady_state(
    plan: RoundPlan,
    nodes: Sequence[NodeRecord],
    config: SimConfig,
    ledger: EnergyLedger,
    failures: FailureInjection = FailureInjection(),
    rng: Optional[np.random.Generator] = None,
) -> int:
    """Members send to their CH slot by slot; the CH aggregates and sends to the BS.

    There is no failover: once a CH dies, its cluster delivers nothing this
    round, and members still in the schedule transmit into the void.
    Returns the number of packets delivered to the BS.
    """
    radio = _Radio(nodes, config, ledger)
    inject = _Failures(failures, ledger.round, nodes, ledger, rng)
    inject.at_start()
    delivered = 0
    data = config.radio.data_bits
    for entry, slots in zip(plan.role_table, plan.tdma):
        cluster_nodes = [entry.ch, *slots]
        received = 0
        for i, member in enumerate(slots):
            inject.at_slot(cluster_nodes, i)
            if radio.send(member, entry.ch, data):
                received += 1
        inject.after_schedule(cluster_nodes, len(slots))
        if nodes[entry.ch].alive:
            radio.aggregate(entry.ch, received)
            if radio.send(entry.ch, BS, data):
                delivered += 1
                ledger.emit(EventKind.DELIVERY_TO_BS, entry.cluster, f"ch={entry.ch}")
    for node_id in plan.direct:
        if radio.send(node_id, BS, data):
            delivered += 1
            ledger.emit(EventKind.DELIVERY_TO_BS, node_id, "direct")
    inject.at_end()
    return delivered


# -- IVC -----------------------------------------------------------------------


def ivc_configuration(
    nodes: Sequence[NodeRecord],
    config: SimConfig,
    prev_roles: Optional[RoleTable],
    rng: np.random.Generator,
    ledger: EnergyLedger,
) -> RoundPlan:
    """Status reports to the BS, BS-side election, then the BS role broadcast.

    Nodes send an explicit status report only at the first configuration
    (``prev_roles is None``); afterwards the BS works from the id/energy
    header carried up with the previous round's data. Nodes exhausted by
    their status report are left out of the election.
    Nodes exhausted by the broadcast keep their elected slot in the role table
    (the steady state fails over around them) but get no TDMA slot.
    """
    radio = _Radio(nodes, config, ledger)
    ctrl = config.radio.ctrl_bits
    if prev_roles is None:
        for n in nodes:
            if n.alive:
                radio.send(n.id, BS, ctrl)
    if not any(n.alive for n in nodes):
        return RoundPlan(protocol=Protocol.IVC, role_table=[], tdma=[])

    assignment, values, roles = configure_round(nodes, config, prev_roles, rng)
    rx = rx_energy(config.radio, ctrl)
    for n in nodes:
        if n.alive:
            ledger.charge(n, rx, "rx")

    prev_ch = {e.ch for e in prev_roles} if prev_roles else set()
    for n in nodes:
        n.was_ch_prev_round = n.id in prev_ch
        if n.alive:
            n.role = Role.NORMAL
            n.cluster_id = assignment.labels[n.id]
    tdma = []
    for entry, members in zip(roles, assignment.members):
        for attr, role in _ROLE_OF.items():
            node_id = getattr(entry, attr)
            if node_id is not None and nodes[node_id].alive:
                nodes[node_id].role = role
        tdma.append([
            i for i in members
            if nodes[i].alive and i != entry.ch and i != entry.chsec
        ])
    return RoundPlan(
        protocol=Protocol.IVC, role_table=roles, tdma=tdma, assignment=assignment, values=values
    )


def _ivc_cluster(entry: RoleEntry, slots: list[int], nodes, config, radio: _Radio,
                 ledger: EnergyLedger, inject: _Failures) -> int:
    data, ctrl = config.radio.data_bits, config.radio.ctrl_bits
    cluster = entry.cluster
    leaders = entry.leaders()
    cluster_nodes = leaders + slots
    alive = lambda i: i is not None and nodes[i].alive  # noqa: E731

    if not any(alive(i) for i in leaders):
        ledger.emit(EventKind.CLUSTER_ISOLATED, cluster, "all leaders dead")
        return 0

    # Receivers in takeover order: collector, its vice, then the heads collect directly.
    chain = [i for i in (entry.chsec, entry.chsecv, entry.ch, entry.chv) if i is not None]
    pos = 0
    received = 0
    isolated = False

    def advance() -> bool:
        nonlocal pos, received
        old = chain[pos]
        pos += 1
        received = 0
        if pos >= len(chain):
            return False
        new = chain[pos]
        if old == entry.chsec and new == entry.chsecv:
            ledger.emit(EventKind.CHSEC_FAILOVER, cluster, f"{old}->{new}")
        elif old == entry.ch and new == entry.chv:
            ledger.emit(EventKind.CH_FAILOVER, cluster, f"{old}->{new}")
        return True

    for i, member in enumerate(slots):
        inject.at_slot(cluster_nodes, i)
        if not nodes[member].alive:
            continue
        while True:
            target = chain[pos]
            if target == member:
                break  # the member itself now collects; its reading stays local
            if radio.send(member, target, data):
                # live message back to the slot owner, unless reception drained the collector
                if nodes[target].alive:
                    received += 1
                    radio.send(target, member, ctrl)
                    break
            if not nodes[member].alive:
                break
            if not advance():
                isolated = True
                break
        if isolated:
            break
    if isolated:
        ledger.emit(EventKind.CLUSTER_ISOLATED, cluster, "all leaders lost during schedule")
        return 0

    inject.after_schedule(cluster_nodes, len(slots))

    collector = chain[pos] if pos < len(chain) else None
    heads = [i for i in (entry.ch, entry.chv) if i is not None]
    delivered = False

    if collector in heads:
        # heads collected directly; skip failed heads before the active one
        heads = heads[heads.index(collector):]
        if alive(collector):
            radio.aggregate(collector, received)
            if radio.send(collector, BS, data):
                delivered = True
                ledger.emit(EventKind.DELIVERY_TO_BS, cluster, f"head={collector} collected")
    elif alive(collector):
        radio.aggregate(collector, received)
        for h_idx, head in enumerate(heads):
            if not alive(collector):
                break
            if h_idx > 0:
                ledger.emit(EventKind.CH_FAILOVER, cluster, f"{heads[h_idx - 1]}->{head}")
            acked = (
                radio.send(collector, head, ctrl)
                and alive(head)
                and radio.send(head, collector, ctrl)
            )
            if not acked or not alive(collector):
                continue
            if radio.send(collector, head, data) and alive(head):
                if radio.send(head, BS, data):
                    delivered = True
                    ledger.emit(EventKind.DELIVERY_TO_BS, cluster, f"head={head}")
                    break
        if not delivered and alive(collector):
            if radio.send(collector, BS, data):
                delivered = True
                ledger.emit(EventKind.DELIVERY_TO_BS, cluster, f"collector={collector} direct")

    if not delivered:
        # last resort: any surviving leader reports its own reading
        for leader in (entry.ch, entry.chv, entry.chsec, entry.chsecv):
            if alive(leader) and radio.send(leader, BS, data):
                delivered = True
                ledger.emit(EventKind.DELIVERY_TO_BS, cluster, f"leader={leader} fallback")
                break
    return int(delivered)


def ivc_steady_state(
    plan: RoundPlan,
    nodes: Sequence[NodeRecord],
    config: SimConfig,
    ledger: EnergyLedger,
    failures: FailureInjection = FailureInjection(),
    rng: Optional[np.random.Generator] = None,
) -> int:
    """One TDMA cycle per cluster with live-message and ACK driven failover.

    Per slot the member sends its reading to the acting collector (CHsec,
    then CHsecv) and gets a live message back; a missing live message makes
    the member resend to the next receiver. The collector aggregates, does a
    request/ACK handshake with the acting head (CH, then CHv) and hands over
    the fused packet, which the head forwards to the BS. Returns the number
    of clusters that delivered.
    """
    for entry, slots in zip(plan.role_table, plan.tdma):
        for i in slots:
            if i in (entry.ch, entry.chsec):
                raise ValueError(f"cluster {entry.cluster}: leader {i} scheduled as member")
    radio = _Radio(nodes, config, ledger)
    inject = _Failures(failures, ledger.round, nodes, ledger, rng)
    inject.at_start()
    delivered = 0
    for entry, slots in zip(plan.role_table, plan.tdma):
        delivered += _ivc_cluster(entry, slots, nodes, config, radio, ledger, inject)
    inject.at_end()
    return delivered
