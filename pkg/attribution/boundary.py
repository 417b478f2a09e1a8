"""
Split hyperplanes of a graph and where a straight path from s to e meets them.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

import numpy as np

from model_ir.exceptions import ArityMismatch
from model_ir.graph import CompositionGraph, as_feature_vector, path_points

logger = logging.getLogger(__name__)

ALPHA_GROUPING_TOL = 1e-12
NO_THRESHOLD_STEP = 1.0


def on_threshold_tol(b) -> np.ndarray:
    return 1e-12 * np.maximum(1.0, np.abs(b))


@dataclass(frozen=True)
class BoundaryTable:
    """Per feature: strictly increasing thresholds where the model may jump"""
    thresholds: Dict[int, np.ndarray] = field(default_factory=dict)

    def __iter__(self):
        return iter(sorted(self.thresholds.items()))

    def for_feature(self, feature: int) -> np.ndarray:
        return self.thresholds.get(feature, np.empty(0))

    @property
    def is_empty(self) -> bool:
        return not any(t.size for t in self.thresholds.values())

    def to_dict(self) -> Dict[str, List[float]]:
        return {str(f): t.tolist() for f, t in self}


@dataclass(frozen=True)
class PathQuery:
    s: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        e = np.array(self.e, dtype=float)
        if s.shape != e.shape or s.ndim != 1:
            raise ArityMismatch(f"Path endpoints disagree in shape: {s.shape} vs {e.shape}")
        s.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, 's', s)
        object.__setattr__(self, 'e', e)

    @classmethod
    def for_graph(cls, graph: CompositionGraph, s, e) -> 'PathQuery':
        return cls(as_feature_vector(s, graph.n_features), as_feature_vector(e, graph.n_features))

    @property
    def travel(self) -> np.ndarray:
        return self.e - self.s

    @property
    def travel_signs(self) -> np.ndarray:
        return np.sign(self.travel)

    @property
    def pinned_axes(self) -> frozenset:
        """Axes the path never moves along"""
        return frozenset(int(i) for i in np.flatnonzero(self.s == self.e))

    def reversed(self) -> 'PathQuery':
        return PathQuery(self.e, self.s)

    def point(self, alpha: float) -> np.ndarray:
        return path_points(self.s, self.e, [alpha])[0]


@dataclass(frozen=True)
class Crossing:
    """One interior discontinuity: every hyperplane the path meets at `alpha`"""
    alpha: float
    features: Tuple[int, ...]
    thresholds: Tuple[float, ...]
    point: np.ndarray

    @property
    def radix(self) -> int:
        return len(self.features)


def extract_boundaries(graph: CompositionGraph) -> BoundaryTable:
    """Union of every (feature, threshold) pair in the graph's tree ensembles"""
    table = BoundaryTable(dict(graph.split_points))
    logger.debug(f"Boundary table: {sum(t.size for _, t in table)} thresholds over {len(table.thresholds)} features")
    return table


def enumerate_crossings(table: BoundaryTable, q: PathQuery) -> List[Crossing]:
    """Interior hyperplane hits sorted by alpha; hits within 1e-12 in alpha merge into one crossing"""
    hits: List[Tuple[float, int, float]] = []
    for feature, thresholds in table:
        s_i, e_i = q.s[feature], q.e[feature]
        if s_i == e_i or not thresholds.size:
            continue
        lo, hi = min(s_i, e_i), max(s_i, e_i)
        tol = on_threshold_tol(thresholds)
        inside = thresholds[(thresholds > lo + tol) & (thresholds < hi - tol)]
        for b in inside:
            hits.append(((b - s_i) / (e_i - s_i), feature, float(b)))
    hits.sort()

    groups: List[List[Tuple[float, int, float]]] = []
    for hit in hits:
        if groups and hit[0] - groups[-1][0][0] <= ALPHA_GROUPING_TOL:
            groups[-1].append(hit)
        else:
            groups.append([hit])

    crossings = []
    for group in groups:
        alpha = group[0][0]
        features: List[int] = []
        thresholds: List[float] = []
        for _, feature, b in group:
            if feature not in features:
                features.append(feature)
                thresholds.append(b)
            else:
                kept = thresholds[features.index(feature)]
                logger.warning(
                    f"⚠️  Feature {feature}: thresholds {kept!r} and {b!r} fall in one crossing at "
                    f"alpha={alpha:.12g}; only {kept!r} is used for the corner")
        order = np.argsort(features, kind='stable')
        features = [features[k] for k in order]
        thresholds = [thresholds[k] for k in order]
        point = q.point(alpha)
        point[features] = thresholds
        point.setflags(write=False)
        crossings.append(Crossing(float(alpha), tuple(features), tuple(thresholds), point))
    return crossings


def endpoint_radix(table: BoundaryTable, x: np.ndarray) -> Set[int]:
    """Features on which x lies on a threshold (same tolerance as crossings)"""
    incident = set()
    for feature, thresholds in table:
        if thresholds.size and np.any(np.abs(thresholds - x[feature]) <= on_threshold_tol(thresholds)):
            incident.add(int(feature))
    return incident


def safe_step(table: BoundaryTable, crossings: List[Crossing], q: PathQuery) -> float:
    """
    Perturbation size that keeps every corner and endpoint probe inside one cell.

    A quarter of the smallest of: gaps between consecutive thresholds, and
    distances from moving endpoint coordinates to thresholds they are not on;
    capped by a quarter of the smallest alpha spacing in coordinate units.
    """
    distances: List[float] = []
    for feature, thresholds in table:
        if thresholds.size > 1:
            distances.append(float(np.min(np.diff(thresholds))))
        if q.s[feature] == q.e[feature] or not thresholds.size:
            continue
        tol = on_threshold_tol(thresholds)
        for x_i in (q.s[feature], q.e[feature]):
            d = np.abs(thresholds - x_i)
            d = d[d > tol]
            if d.size:
                distances.append(float(d.min()))
    if not distances:
        return NO_THRESHOLD_STEP

    delta = 0.25 * min(distances)
    alphas = np.array([0.0] + [c.alpha for c in crossings] + [1.0])
    spacing = np.diff(alphas)
    spacing = spacing[spacing > 0]
    scale = float(np.max(np.abs(q.travel))) if q.travel.size else 0.0
    if spacing.size and scale > 0:
        delta = min(delta, 0.25 * float(spacing.min()) * scale)
    logger.debug(f"Safe step {delta!r} from {len(distances)} distances and {len(crossings)} crossings")
    return delta
