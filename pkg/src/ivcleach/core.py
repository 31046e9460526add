"""Domain types, geometry and the first-order radio energy model."""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DeadNodeChargeError(RuntimeError):
    """Raised when energy is charged to a node that is already dead."""


class ConfigError(ValueError):
    """Invalid simulation configuration. ``key`` names the offending setting."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class DomainError(ValueError):
    """Input outside the domain of a valuation or geometry function."""


class Role(str, enum.Enum):
    CH = "CH"
    CHV = "CHv"
    CHSEC = "CHsec"
    CHSECV = "CHsecv"
    NORMAL = "Normal"


class Protocol(str, enum.Enum):
    LEACH = "LEACH"
    IVC = "IVC"


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass
class NodeRecord:
    id: int
    pos: Position
    initial_energy: float
    residual_energy: float
    alive: bool = True
    role: Role = Role.NORMAL
    cluster_id: Optional[int] = None
    was_ch_prev_round: bool = False

    @property
    def energy_fraction(self) -> float:
        return self.residual_energy / self.initial_energy


@dataclass(frozen=True)
class RadioModel:
    """First-order radio model constants (joules per bit, metres).

    The defaults are the usual LEACH literature values.
    """

    e_elec: float = 50e-9
    eps_fs: float = 10e-12
    eps_mp: float = 0.0013e-12
    e_da: float = 5e-9
    data_bits: int = 4000
    ctrl_bits: int = 200

    def __post_init__(self):
        for name in ("e_elec", "eps_fs", "eps_mp", "e_da", "data_bits", "ctrl_bits"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(name, f"must be a positive finite number, got {value!r}")

    @functools.cached_property
    def d0(self) -> float:
        """Crossover distance between the free-space and multipath regimes."""
        return math.sqrt(self.eps_fs / self.eps_mp)


@dataclass(frozen=True)
class FailureInjection:
    """Externally imposed node failures.

    ``mode`` is ``"none"``, ``"probabilistic"`` (each alive node fails with
    probability ``prob`` at the start of every steady state) or ``"scripted"``.
    Scripted kills are ``(round, node_id, after_slots)`` triples: the node is
    killed once its cluster has completed ``after_slots`` TDMA slots in that
    round (0 means before the first slot). A very large ``after_slots`` kills
    the node after the TDMA cycle but before forwarding.
    """

    mode: str = "none"
    prob: float = 0.0
    kills: tuple = ()

    def __post_init__(self):
        if self.mode not in ("none", "probabilistic", "scripted"):
            raise ConfigError("failure_injection", f"unknown mode {self.mode!r}")
        if not 0.0 <= self.prob <= 1.0:
            raise ConfigError("fail_prob", f"must lie in [0, 1], got {self.prob!r}")
        norm = []
        for kill in self.kills:
            if len(kill) == 2:
                kill = (kill[0], kill[1], 0)
            rnd, node, slot = (int(v) for v in kill)
            if rnd < 1 or node < 0 or slot < 0:
                raise ConfigError("kill", f"invalid kill entry {kill!r}")
            norm.append((rnd, node, slot))
        object.__setattr__(self, "kills", tuple(sorted(norm)))

    @classmethod
    def scripted(cls, kills: Sequence) -> "FailureInjection":
        return cls(mode="scripted", kills=tuple(kills))

    @classmethod
    def probabilistic(cls, prob: float) -> "FailureInjection":
        return cls(mode="probabilistic", prob=prob)


@dataclass(frozen=True)
class SimConfig:
    area_width: float = 100.0
    area_height: float = 100.0
    n_nodes: int = 100
    bs_pos: Position = Position(100.0, 50.0)
    initial_energy: float = 0.5
    max_rounds: int = 2500
    k_clusters: int = 5
    radio: RadioModel = field(default_factory=RadioModel)
    protocol: Protocol = Protocol.IVC
    leach_p: float = 0.05
    seed: int = 0
    failure_injection: FailureInjection = field(default_factory=FailureInjection)
    tie_break: str = "id"

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if self.tie_break not in ("id", "energy"):
            raise ConfigError("tie_break", f"must be 'id' or 'energy', got {self.tie_break!r}")
        if not isinstance(self.bs_pos, Position):
            object.__setattr__(self, "bs_pos", Position(*self.bs_pos))
        for name in ("area_width", "area_height", "initial_energy"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(name, f"must be positive, got {value!r}")
        if self.n_nodes < 1:
            raise ConfigError("n_nodes", f"must be >= 1, got {self.n_nodes}")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds", f"must be >= 1, got {self.max_rounds}")
        if not 1 <= self.k_clusters <= self.n_nodes:
            raise ConfigError(
                "k_clusters", f"must lie in [1, n_nodes={self.n_nodes}], got {self.k_clusters}"
            )
        if not 0.0 < self.leach_p <= 1.0:
            raise ConfigError("leach_p", f"must lie in (0, 1], got {self.leach_p}")
        if not (math.isfinite(self.bs_pos.x) and math.isfinite(self.bs_pos.y)):
            raise ConfigError("bs_pos", "coordinates must be finite")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", f"must be a 64-bit unsigned integer, got {self.seed}")
        for rnd, node, _ in self.failure_injection.kills:
            if node >= self.n_nodes:
                raise ConfigError("kill", f"node id {node} out of range for {self.n_nodes} nodes")

    @property
    def area(self) -> tuple[float, float]:
        return (self.area_width, self.area_height)


def distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def tx_energy(model: RadioModel, bits: int, d: float) -> float:
    """Energy to transmit ``bits`` over ``d`` metres."""
    if d < model.d0:
        return bits * (model.e_elec + model.eps_fs * d * d)
    return bits * (model.e_elec + model.eps_mp * d**4)


def rx_energy(model: RadioModel, bits: int) -> float:
    return bits * model.e_elec


def deduct(node: NodeRecord, cost: float) -> NodeRecord:
    """Charge ``cost`` joules to ``node`` in place and return it.

    Residual energy is clamped at zero; a node reaching zero dies and drops
    its role and cluster. The charge that kills a node still completes.
    """
    if cost < 0:
        raise ValueError(f"cost must be nonnegative, got {cost}")
    if not node.alive:
        raise DeadNodeChargeError(f"node {node.id} is dead and cannot be charged")
    node.residual_energy = max(node.residual_energy - cost, 0.0)
    if node.residual_energy == 0.0:
        kill(node)
    return node


def kill(node: NodeRecord) -> None:
    node.residual_energy = 0.0
    node.alive = False
    node.role = Role.NORMAL
    node.cluster_id = None


def deploy(config: SimConfig, rng: np.random.Generator) -> list[NodeRecord]:
    """Scatter ``n_nodes`` uniformly over the field, all at full energy."""
    xy = rng.uniform(size=(config.n_nodes, 2)) * np.array(config.area)
    return [
        NodeRecord(
            id=i,
            pos=Position(float(x), float(y)),
            initial_energy=config.initial_energy,
            residual_energy=config.initial_energy,
        )
        for i, (x, y) in enumerate(xy)
    ]
