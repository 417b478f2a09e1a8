"""
Empirical checks of the attribution axioms for one graph and path.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from model_ir.composition import linear_combination, permute_features
from model_ir.graph import CompositionGraph

from .boundary import PathQuery
from .corner_credit import CornerContext, iota_from_values, shapley_lift_oracle, zeta_from_values
from .engine import Attribution, AttributionEngine, EngineConfig, orthant_values_batch

logger = logging.getLogger(__name__)


@dataclass
class AuditReport:
    efficiency_residual: float
    reflexivity_deviation: float
    constant_variable_max: float
    null_variable_max: float
    corner_oracle_deviation: float
    endpoint_reflexivity_deviation: float
    corners_checked: int
    linearity_deviation: Optional[float] = None
    symmetry_deviation: Optional[float] = None
    symmetry_discrete_exact: Optional[bool] = None
    tolerance: float = 1e-5
    notes: List[str] = field(default_factory=list)

    @property
    def checks(self) -> Dict[str, bool]:
        tol = self.tolerance
        result = {
            'efficiency': abs(self.efficiency_residual) <= tol,
            'reflexivity': self.reflexivity_deviation <= 2 * tol,
            'constant_variable': self.constant_variable_max == 0.0,
            'null_variable': self.null_variable_max == 0.0,
            'corner_oracle': self.corner_oracle_deviation <= 1e-12,
            'endpoint_reflexivity': self.endpoint_reflexivity_deviation <= 1e-12,
        }
        if self.linearity_deviation is not None:
            result['linearity'] = self.linearity_deviation <= tol
        if self.symmetry_deviation is not None:
            result['symmetry'] = bool(self.symmetry_discrete_exact) and self.symmetry_deviation <= 1e-12
        return result

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), 'checks': self.checks, 'passed': self.passed}


def corner_oracle_deviation(engine: AttributionEngine, q: PathQuery) -> Tuple[float, int]:
    """Largest |zeta - Shapley lift| over every interior crossing of q, in exact arithmetic"""
    crossings, delta, _, _ = engine.plan(q)
    corners = [CornerContext.at_crossing(engine.graph, c, q, delta) for c in crossings]
    worst = 0.0
    for ctx, values in zip(corners, orthant_values_batch(engine.graph, corners)):
        diff = zeta_from_values(ctx, values) - shapley_lift_oracle(ctx, values)
        worst = max(worst, max((abs(float(d)) for d in diff), default=0.0))
    return worst, len(corners)


def endpoint_reflexivity_deviation(engine: AttributionEngine, q: PathQuery) -> float:
    """|iota_start(s -> e) + iota_end(e -> s)| on boundary-incident starts"""
    _, delta, start_axes, _ = engine.plan(q)
    if not start_axes:
        return 0.0
    back = q.reversed()
    _, back_delta, _, back_end_axes = engine.plan(back)
    graph = engine.graph
    step = min(delta, back_delta)
    forward_ctx = CornerContext.at_endpoint(graph, q.s, start_axes, q, step)
    backward_ctx = CornerContext.at_endpoint(graph, back.e, back_end_axes, back, step)
    f_s = graph.evaluate(q.s)
    fwd_values, back_values = orthant_values_batch(graph, [forward_ctx, backward_ctx])
    total = (iota_from_values(forward_ctx, fwd_values, f_s, 'start')
             + iota_from_values(backward_ctx, back_values, f_s, 'end'))
    return max(abs(float(t)) for t in total)


def symmetry_deviation(engine: AttributionEngine, q: PathQuery, perm: Sequence[int],
                       forward: Optional[Attribution] = None) -> Tuple[bool, float]:
    """
    Relabel features by `perm`, explain the relabelled path, and compare
    credits feature by feature.

    Returns whether the discrete credits (zeta + iota) agree exactly as
    fractions, and the largest deviation of the quadrature part.
    """
    perm = np.asarray(perm, dtype=np.int64)
    forward = forward or engine.explain(q)
    s, e = np.empty_like(q.s), np.empty_like(q.e)
    s[perm], e[perm] = q.s, q.e
    permuted = AttributionEngine(permute_features(engine.graph, perm), engine.config).explain(PathQuery(s, e))
    discrete_exact = all(a == b for a, b in zip(permuted.exact_discrete[perm], forward.exact_discrete))
    return discrete_exact, float(np.max(np.abs(permuted.integral[perm] - forward.integral)))


def axiom_audit(graph: CompositionGraph, q: PathQuery, config: Optional[EngineConfig] = None,
                other: Optional[CompositionGraph] = None, weights: Sequence[float] = (1.0, 1.0),
                perm: Optional[Sequence[int]] = None) -> AuditReport:
    """
    Efficiency, reflexivity, constant- and null-variable zeros, corner oracle
    agreement, linearity against `other` and symmetry under `perm` when given.
    """
    config = config or EngineConfig()
    engine = AttributionEngine(graph, config)
    forward = engine.explain(q)
    backward = engine.explain(q.reversed())

    pinned = sorted(q.pinned_axes)
    null = sorted(set(range(graph.n_features)) - set(graph.read_features))
    oracle_dev, corners = corner_oracle_deviation(engine, q)

    linearity = None
    if other is not None:
        a, b = weights
        mixed = AttributionEngine(linear_combination([graph, other], [a, b]), config).explain(q)
        second = AttributionEngine(other, config).explain(q)
        linearity = float(np.max(np.abs(mixed.total - (a * forward.total + b * second.total))))

    symmetry_exact, symmetry = None, None
    if perm is not None:
        symmetry_exact, symmetry = symmetry_deviation(engine, q, perm, forward)

    report = AuditReport(
        efficiency_residual=forward.efficiency_residual,
        reflexivity_deviation=float(np.max(np.abs(forward.total + backward.total))),
        constant_variable_max=float(np.max(np.abs(forward.total[pinned]))) if pinned else 0.0,
        null_variable_max=float(np.max(np.abs(forward.total[null]))) if null else 0.0,
        corner_oracle_deviation=oracle_dev,
        endpoint_reflexivity_deviation=endpoint_reflexivity_deviation(engine, q),
        corners_checked=corners,
        linearity_deviation=linearity,
        symmetry_deviation=symmetry,
        symmetry_discrete_exact=symmetry_exact,
        tolerance=config.efficiency_tol,
    )
    if not report.passed:
        failed = [name for name, ok in report.checks.items() if not ok]
        report.notes.append(f"failed checks: {', '.join(failed)}")
        logger.warning(f"⚠️  Axiom audit failed: {failed}")
    return report


def random_paths(graph: CompositionGraph, rows: np.ndarray, n_paths: int, seed: int = 0,
                 pin_prob: float = 0.0, snap_prob: float = 0.0) -> List[PathQuery]:
    """
    Endpoint pairs drawn from `rows`.

    With probability `pin_prob` a feature of e is set equal to s (a constant
    variable); with probability `snap_prob` a feature of s is moved onto its
    nearest split threshold (a boundary-incident start).
    """
    rng = np.random.default_rng(seed)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] < 2:
        raise ValueError("Need at least 2 rows to draw paths")
    splits = graph.split_points
    paths = []
    for _ in range(n_paths):
        i, j = rng.choice(rows.shape[0], size=2, replace=False)
        s, e = rows[i].copy(), rows[j].copy()
        for f in range(graph.n_features):
            if snap_prob and f in splits and rng.uniform() < snap_prob:
                thresholds = splits[f]
                s[f] = thresholds[np.argmin(np.abs(thresholds - s[f]))]
            if pin_prob and rng.uniform() < pin_prob:
                e[f] = s[f]
        paths.append(PathQuery(s, e))
    return paths


@dataclass
class AuditSummary:
    paths: int
    passed: int
    failed_paths: List[Dict[str, Any]] = field(default_factory=list)
    worst: Dict[str, float] = field(default_factory=dict)
    corners_checked: int = 0

    @property
    def all_passed(self) -> bool:
        return self.passed == self.paths

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), 'all_passed': self.all_passed}


WORST_FIELDS = (
    'efficiency_residual', 'reflexivity_deviation', 'constant_variable_max', 'null_variable_max',
    'corner_oracle_deviation', 'endpoint_reflexivity_deviation', 'linearity_deviation', 'symmetry_deviation',
)


def summarize(reports: Sequence[AuditReport], errors: Sequence[Dict[str, Any]] = ()) -> AuditSummary:
    """Largest deviation of every check over all audited paths"""
    worst: Dict[str, float] = {}
    for name in WORST_FIELDS:
        values = [abs(getattr(r, name)) for r in reports if getattr(r, name) is not None]
        if values:
            worst[name] = max(values)
    failed = [{'path': i, 'notes': r.notes} for i, r in enumerate(reports) if not r.passed]
    return AuditSummary(
        paths=len(reports) + len(errors),
        passed=sum(r.passed for r in reports),
        failed_paths=failed + list(errors),
        worst=worst,
        corners_checked=sum(r.corners_checked for r in reports),
    )
