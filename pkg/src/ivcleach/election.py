"""Base-station side configuration: geographic grouping, valuation and role election."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import DomainError, NodeRecord, Position, SimConfig, distance
from .valuation import centrality_mask, score_matrix

ROLE_ORDER = ("ch", "chsec", "chv", "chsecv")


def _sq_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


class GeographicKMeans(ClusterMixin, BaseEstimator):
    """Lloyd's k-means on 2-D positions with seeded k-means++ seeding.

    Ties in nearest-centroid assignment go to the lower cluster index. Empty
    clusters are repaired by moving in the point farthest from its own
    centroid. The effective number of clusters is ``min(n_clusters, n_samples)``.

    Parameters
    ----------
    n_clusters : int
    max_iter : int
        Upper bound on assignment/update iterations.
    random_state : int, numpy Generator or None
        A Generator is consumed in place, which lets callers thread one
        stream through successive fits.
    """

    def __init__(self, n_clusters: int = 5, max_iter: int = 100, random_state=None):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters must be >= 1, got {self.n_clusters}")
        rng = np.random.default_rng(self.random_state)
        self.labels_, self.cluster_centers_, self.n_iter_ = lloyd(
            X, self.n_clusters, rng, self.max_iter
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=float)
        return np.argmin(_sq_dist(X, self.cluster_centers_), axis=1)


def _init_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dist(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with a chosen center
            pool = np.setdiff1d(np.arange(n), chosen)
            idx = int(pool[rng.integers(pool.size)])
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dist(X, X[[idx]])[:, 0])
    return X[chosen].copy()


def _repair(X: np.ndarray, centers: np.ndarray, labels: np.ndarray, k: int) -> None:
    counts = np.bincount(labels, minlength=k)
    while np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        diff = X - centers[labels]
        own = np.einsum("ij,ij->i", diff, diff)
        own[counts[labels] <= 1] = -1.0
        idx = int(np.argmax(own))
        counts[labels[idx]] -= 1
        labels[idx] = empty
        counts[empty] = 1
        centers[empty] = X[idx]


def lloyd(X: np.ndarray, n_clusters: int, rng: np.random.Generator, max_iter: int = 100):
    """Unvalidated k-means core; returns ``(labels, centers, n_iter)``."""
    k = min(n_clusters, X.shape[0])
    centers = _init_centers(X, k, rng)
    labels = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new_labels = np.argmin(_sq_dist(X, centers), axis=1)
        _repair(X, centers, new_labels, k)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        centers = np.column_stack([
            np.bincount(labels, weights=X[:, 0], minlength=k),
            np.bincount(labels, weights=X[:, 1], minlength=k),
        ]) / counts[:, None]
    return labels, centers, n_iter


@dataclass
class ClusterAssignment:
    labels: dict[int, int]
    members: list[list[int]]
    centroids: list[Position]

    @property
    def n_clusters(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class RoleEntry:
    cluster: int
    ch: int
    chsec: Optional[int] = None
    chv: Optional[int] = None
    chsecv: Optional[int] = None

    def leaders(self) -> list[int]:
        return [i for i in (self.ch, self.chsec, self.chv, self.chsecv) if i is not None]


RoleTable = list  # list[RoleEntry], indexed by cluster


def partition(alive_nodes: Sequence[NodeRecord], k: int, rng) -> ClusterAssignment:
    if not alive_nodes:
        raise DomainError("cannot partition an empty node set")
    X = np.array([(n.pos.x, n.pos.y) for n in alive_nodes], dtype=float)
    km_labels, km_centers, _ = lloyd(X, k, np.random.default_rng(rng))
    ids = [n.id for n in alive_nodes]
    members: list[list[int]] = [[] for _ in range(km_centers.shape[0])]
    labels = {}
    for node_id, lab in zip(ids, km_labels):
        labels[node_id] = int(lab)
        members[int(lab)].append(node_id)
    centroids = [Position(float(x), float(y)) for x, y in km_centers]
    return ClusterAssignment(labels=labels, members=[sorted(m) for m in members], centroids=centroids)


def build_value_table(
    nodes: Sequence[NodeRecord],
    assignment: ClusterAssignment,
    bs: Position,
    area: tuple[float, float],
    prev_roles: Optional[Iterable[RoleEntry]] = None,
) -> dict[int, float]:
    """Score every clustered node from its energy, BS distance, centrality and CH history."""
    by_id = {n.id: n for n in nodes}
    prev_ch = {e.ch for e in prev_roles} if prev_roles else set()
    width, height = area
    reach = max(distance(bs, Position(cx, cy)) for cx in (0.0, width) for cy in (0.0, height))
    ids: list[int] = []
    rows = []
    for members in assignment.members:
        pts = np.array([(by_id[i].pos.x, by_id[i].pos.y) for i in members], dtype=float)
        center = centrality_mask(pts)
        for node_id, is_center in zip(members, center):
            node = by_id[node_id]
            ids.append(node_id)
            rows.append((
                min(node.residual_energy / node.initial_energy, 1.0),
                min(distance(node.pos, bs) / reach, 1.0),
                float(is_center),
                float(node_id in prev_ch),
            ))
    scores = score_matrix(np.array(rows))
    return {node_id: float(s) for node_id, s in zip(ids, scores)}


TIE_BREAKS = ("id", "energy")


def election_key(node: NodeRecord, values: dict[int, float], tie_break: str = "id"):
    """Sort key: best value first, then (optionally) more residual energy, then lower id."""
    if tie_break == "energy":
        return (-values[node.id], -node.residual_energy, node.id)
    return (-values[node.id], node.id)


def elect_roles(
    cluster_members: Sequence[NodeRecord],
    values: dict[int, float],
    cluster: int = 0,
    tie_break: str = "id",
) -> RoleEntry:
    """Rank members by value and hand out CH, CHsec, CHv, CHsecv in that order.

    Equal values fall back to the lower node id, or with ``tie_break="energy"``
    to the larger residual energy first.
    """
    if not cluster_members:
        raise DomainError(f"cluster {cluster} has no members")
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"tie_break must be one of {TIE_BREAKS}, got {tie_break!r}")
    ranked = sorted(cluster_members, key=lambda n: election_key(n, values, tie_break))
    picks = {role: ranked[i].id for i, role in enumerate(ROLE_ORDER) if i < len(ranked)}
    return RoleEntry(cluster=cluster, **picks)


def configure_round(
    nodes: Sequence[NodeRecord],
    config: SimConfig,
    prev_roles: Optional[RoleTable],
    rng,
) -> tuple[ClusterAssignment, dict[int, float], RoleTable]:
    alive = [n for n in nodes if n.alive]
    assignment = partition(alive, config.k_clusters, rng)
    values = build_value_table(alive, assignment, config.bs_pos, config.area, prev_roles)
    by_id = {n.id: n for n in alive}
    roles = [
        elect_roles([by_id[i] for i in members], values, cluster=c, tie_break=config.tie_break)
        for c, members in enumerate(assignment.members)
    ]
    return assignment, values, roles
