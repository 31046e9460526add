"""Round loop, lifetime marks and paired protocol comparison."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import mean
from typing import Optional, Sequence

import numpy as np

from .core import NodeRecord, Protocol, SimConfig, deploy
from .protocols import (
    EnergyLedger,
    LeachState,
    RoundEvent,
    ivc_configuration,
    ivc_steady_state,
    leach_elect,
    leach_steady_state,
)

logger = logging.getLogger(__name__)

CONSERVATION_TOL = 1e-9
# relative allowance so very large batteries do not trip on double rounding
CONSERVATION_REL = 1e-12
STEEPNESS_WINDOW = 10


class ConservationError(AssertionError):
    """A round's energy drop disagrees with its ledger."""


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    alive: int
    died_this_round: int
    total_residual: float
    deliveries: int
    ch_count: int
    charged: float = 0.0
    failure_loss: float = 0.0


@dataclass
class SimResult:
    config: SimConfig
    metrics: list[RoundMetrics]
    fnd: Optional[int]
    hnd: Optional[int]
    lnd: Optional[int]
    events: list[RoundEvent] = field(default_factory=list)
    complete: bool = True

    @property
    def rounds(self) -> int:
        return len(self.metrics)

    @property
    def total_deliveries(self) -> int:
        return sum(m.deliveries for m in self.metrics)

    @property
    def terminated(self) -> bool:
        """True when the whole network died within ``max_rounds``."""
        return self.lnd is not None


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (deployment, election, failure) generators derived from ``seed``."""
    deploy_ss, elect_ss, fail_ss = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(deploy_ss),
        np.random.default_rng(elect_ss),
        np.random.default_rng(fail_ss),
    )


def lifetime_marks(alive_series: Sequence[int], n_nodes: int):
    """First, half and last node death rounds (1-indexed) from per-round alive counts.

    ``hnd`` is the first round with at most ``n_nodes // 2`` nodes alive.
    Marks never reached are ``None``.
    """
    fnd = hnd = lnd = None
    for rnd, alive in enumerate(alive_series, start=1):
        if fnd is None and alive < n_nodes:
            fnd = rnd
        if hnd is None and alive <= n_nodes // 2:
            hnd = rnd
        if lnd is None and alive == 0:
            lnd = rnd
            break
    return fnd, hnd, lnd


def _total(nodes: Sequence[NodeRecord]) -> float:
    return sum(n.residual_energy for n in nodes)


def run(config: SimConfig, nodes: Optional[list[NodeRecord]] = None) -> SimResult:
    """Simulate ``config`` until every node is dead or ``max_rounds`` is reached.

    Each round checks that the drop in residual energy equals the ledger's
    charged costs plus injected-failure losses, to ``CONSERVATION_TOL`` (or a
    relative ``CONSERVATION_REL`` of the network energy when that is larger).
    """
    deploy_rng, elect_rng, fail_rng = rng_streams(config.seed)
    if nodes is None:
        nodes = deploy(config, deploy_rng)
    n = len(nodes)
    metrics: list[RoundMetrics] = []
    events: list[RoundEvent] = []
    prev_roles = None
    leach_state = LeachState()
    before = _total(nodes)
    alive_before = sum(n.alive for n in nodes)

    for rnd in range(1, config.max_rounds + 1):
        if alive_before == 0:
            break
        ledger = EnergyLedger(round=rnd)
        if config.protocol is Protocol.IVC:
            plan = ivc_configuration(nodes, config, prev_roles, elect_rng, ledger)
            delivered = ivc_steady_state(
                plan, nodes, config, ledger, config.failure_injection, fail_rng
            )
            prev_roles = plan.role_table
        else:
            plan = leach_elect(nodes, rnd - 1, config.leach_p, elect_rng, leach_state)
            delivered = leach_steady_state(
                plan, nodes, config, ledger, config.failure_injection, fail_rng
            )
        after = _total(nodes)
        tol = max(CONSERVATION_TOL, CONSERVATION_REL * before)
        if abs((before - after) - ledger.total) > tol:
            raise ConservationError(
                f"round {rnd}: energy drop {before - after!r} != ledger {ledger.total!r}"
            )
        alive = sum(n.alive for n in nodes)
        metrics.append(RoundMetrics(
            round=rnd,
            alive=alive,
            died_this_round=alive_before - alive,
            total_residual=after,
            deliveries=delivered,
            ch_count=plan.ch_count,
            charged=ledger.charged,
            failure_loss=ledger.failure,
        ))
        events.extend(ledger.events)
        before, alive_before = after, alive

    fnd, hnd, lnd = lifetime_marks([m.alive for m in metrics], n)
    logger.debug("%s seed=%d: fnd=%s hnd=%s lnd=%s", config.protocol.value, config.seed, fnd, hnd, lnd)
    return SimResult(config=config, metrics=metrics, fnd=fnd, hnd=hnd, lnd=lnd, events=events)


def max_window_deaths(metrics: Sequence[RoundMetrics], window: int = STEEPNESS_WINDOW) -> int:
    """Largest number of deaths inside any ``window`` consecutive rounds."""
    deaths = np.array([m.died_this_round for m in metrics], dtype=int)
    if deaths.size == 0:
        return 0
    if deaths.size <= window:
        return int(deaths.sum())
    csum = np.concatenate([[0], np.cumsum(deaths)])
    return int((csum[window:] - csum[:-window]).max())


@dataclass
class SeedComparison:
    seed: int
    lnd_a: Optional[int]
    lnd_b: Optional[int]
    fnd_a: Optional[int]
    fnd_b: Optional[int]
    steep_a: int
    steep_b: int

    @property
    def ratio(self) -> Optional[float]:
        """lnd_b / lnd_a, defined only when both networks died out."""
        if self.lnd_a is None or self.lnd_b is None:
            return None
        return self.lnd_b / self.lnd_a


@dataclass
class ComparisonReport:
    """Paired comparison of protocol ``b`` against baseline ``a`` over seeds."""

    protocol_a: Protocol
    protocol_b: Protocol
    per_seed: list[SeedComparison]

    def ratios(self) -> list[float]:
        return [s.ratio for s in self.per_seed if s.ratio is not None]

    @property
    def mean_ratio(self) -> Optional[float]:
        r = self.ratios()
        return mean(r) if r else None

    @property
    def min_ratio(self) -> Optional[float]:
        r = self.ratios()
        return min(r) if r else None

    @property
    def max_ratio(self) -> Optional[float]:
        r = self.ratios()
        return max(r) if r else None

    def mean_fnd(self, which: str) -> Optional[float]:
        vals = [getattr(s, f"fnd_{which}") for s in self.per_seed]
        vals = [v for v in vals if v is not None]
        return mean(vals) if vals else None

    @property
    def steeper_a_count(self) -> int:
        """Seeds where the baseline's worst 10-round death burst exceeds ``b``'s."""
        return sum(s.steep_a > s.steep_b for s in self.per_seed)


def _run_job(config: SimConfig) -> SimResult:
    return run(config)


def compare(
    config: SimConfig,
    seeds: Sequence[int],
    protocols: tuple[Protocol, Protocol] = (Protocol.LEACH, Protocol.IVC),
    workers: Optional[int] = None,
    keep_results: bool = False,
):
    """Run both protocols on each seed's shared deployment and pair the lifetimes.

    ``workers`` > 1 fans runs out over processes; results are merged in seed
    order so the report does not depend on scheduling. With ``keep_results``
    the raw :class:`SimResult` pairs are returned alongside the report.
    """
    if not seeds:
        raise ValueError("compare needs at least one seed")
    a, b = (Protocol(p) for p in protocols)
    jobs = [
        dataclasses.replace(config, seed=s, protocol=p) for s in seeds for p in (a, b)
    ]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [run(j) for j in jobs]
    pairs = [(results[2 * i], results[2 * i + 1]) for i in range(len(seeds))]
    per_seed = [
        SeedComparison(
            seed=s,
            lnd_a=ra.lnd,
            lnd_b=rb.lnd,
            fnd_a=ra.fnd,
            fnd_b=rb.fnd,
            steep_a=max_window_deaths(ra.metrics),
            steep_b=max_window_deaths(rb.metrics),
        )
        for s, (ra, rb) in zip(seeds, pairs)
    ]
    report = ComparisonReport(protocol_a=a, protocol_b=b, per_seed=per_seed)
    return (report, pairs) if keep_results else report
