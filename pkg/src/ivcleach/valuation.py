"""Crisp-binned node valuation: ``(energy + distance + centrality) * penalty``.

Scores are computed on an integer grid of twentieths so that every result is
the nearest double to its decimal table value (0.15, 0.25, ...).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .core import DomainError, Position, distance

_UNIT = 20

ENERGY_LOW, ENERGY_MED, ENERGY_HIGH = 0.2, 0.4, 0.6
DIST_CLOSE, DIST_MED, DIST_FAR = 0.2, 0.1, 0.0
CENTER, SIDE = 0.2, 0.1

ENERGY_MED_THRESHOLD = 0.40
ENERGY_HIGH_THRESHOLD = 0.70
DIST_MED_THRESHOLD = 1.0 / 3.0
DIST_FAR_THRESHOLD = 2.0 / 3.0


class Centrality(str, enum.Enum):
    CENTER = "Center"
    SIDE = "Side"


@dataclass(frozen=True)
class ValuationInputs:
    r_frac: float
    d_frac: float
    centrality: Centrality
    was_ch_prev: bool


def _check_fraction(name: str, value: float) -> None:
    if not (math.isfinite(value) and 0.0 <= value <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")


def _energy_units(r_frac: float) -> int:
    if r_frac < ENERGY_MED_THRESHOLD:
        return 4
    if r_frac < ENERGY_HIGH_THRESHOLD:
        return 8
    return 12


def _distance_units(d_frac: float) -> int:
    if d_frac < DIST_MED_THRESHOLD:
        return 4
    if d_frac < DIST_FAR_THRESHOLD:
        return 2
    return 0


def energy_level(r_frac: float) -> float:
    _check_fraction("r_frac", r_frac)
    return _energy_units(r_frac) / _UNIT


def distance_level(d_frac: float) -> float:
    """Closer to the base station scores higher: 0.2, 0.1 or 0.0."""
    _check_fraction("d_frac", d_frac)
    return _distance_units(d_frac) / _UNIT


def centrality_level(c: Centrality) -> float:
    return CENTER if Centrality(c) is Centrality.CENTER else SIDE


def prev_ch_multiplier(was_ch_prev: bool) -> float:
    return 0.5 if was_ch_prev else 1.0


def node_value(inputs: ValuationInputs) -> float:
    _check_fraction("r_frac", inputs.r_frac)
    _check_fraction("d_frac", inputs.d_frac)
    units = (
        _energy_units(inputs.r_frac)
        + _distance_units(inputs.d_frac)
        + (4 if Centrality(inputs.centrality) is Centrality.CENTER else 2)
    )
    return units * prev_ch_multiplier(inputs.was_ch_prev) / _UNIT


def normalize_bs_distance(pos: Position, bs: Position, area: tuple[float, float]) -> float:
    """Distance to the BS as a fraction of the farthest field corner's distance."""
    width, height = area
    if not (width > 0 and height > 0):
        raise DomainError(f"field must have positive size, got {area!r}")
    reach = max(
        distance(bs, Position(cx, cy)) for cx in (0.0, width) for cy in (0.0, height)
    )
    if reach == 0.0:
        raise DomainError("base station distance to the field is degenerate")
    return min(distance(pos, bs) / reach, 1.0)


def centrality_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of cluster points lying within half the cluster radius of the centroid."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 0:
        raise DomainError("cluster has no members")
    centroid = points.mean(axis=0)
    dist = np.hypot(points[:, 0] - centroid[0], points[:, 1] - centroid[1])
    return dist <= 0.5 * dist.max()


def classify_centrality(pos: Position, cluster_members: Sequence[Position]) -> Centrality:
    if not cluster_members:
        raise DomainError("cluster has no members")
    pts = np.array([(p.x, p.y) for p in cluster_members], dtype=float)
    centroid = pts.mean(axis=0)
    radius = np.hypot(pts[:, 0] - centroid[0], pts[:, 1] - centroid[1]).max()
    d = math.hypot(pos.x - centroid[0], pos.y - centroid[1])
    return Centrality.CENTER if d <= 0.5 * radius else Centrality.SIDE


def score_matrix(X: np.ndarray) -> np.ndarray:
    """Unvalidated vectorised scoring of ``[r_frac, d_frac, is_center, was_ch_prev]`` rows."""
    r, d = X[:, 0], X[:, 1]
    units = (
        np.where(r < ENERGY_MED_THRESHOLD, 4, np.where(r < ENERGY_HIGH_THRESHOLD, 8, 12))
        + np.where(d < DIST_MED_THRESHOLD, 4, np.where(d < DIST_FAR_THRESHOLD, 2, 0))
        + np.where(X[:, 2] != 0, 4, 2)
    )
    return units * np.where(X[:, 3] != 0, 0.5, 1.0) / _UNIT


class NodeValuer(TransformerMixin, BaseEstimator):
    """Vectorised node valuation as a stateless transformer.

    Input columns are ``[r_frac, d_frac, is_center, was_ch_prev]``; the last
    two are read as booleans. ``transform`` returns a 1-D array of scores.
    """

    def fit(self, X, y=None):
        X = self._validate(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        return score_matrix(self._validate(X))

    def _validate(self, X) -> np.ndarray:
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if X.shape[1] != 4:
            raise ValueError(f"expected 4 feature columns, got {X.shape[1]}")
        frac = X[:, :2]
        if np.any(frac < 0.0) or np.any(frac > 1.0):
            raise DomainError("r_frac and d_frac must lie in [0, 1]")
        return X
