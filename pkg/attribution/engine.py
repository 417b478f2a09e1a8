"""
Attribution engine: credit for moving a model input from s to e.

    total = sum of corner credit at interior crossings (zeta)
          + endpoint credit where s or e lies on a split (iota)
          + integrated gradients over the open segments between crossings

Corner and endpoint credit are kept as exact rationals; the efficiency
residual sum(total) - (f(e) - f(s)) is computed exactly as well, so it is
zero for pure tree models.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from django.conf import settings
from tqdm import tqdm

from gig_backend.commands import exit_code_for
from model_ir.graph import CompositionGraph

from .boundary import (
    BoundaryTable,
    Crossing,
    PathQuery,
    endpoint_radix,
    enumerate_crossings,
    extract_boundaries,
    safe_step,
)
from .continuous_credit import QuadratureConfig, Segment, segment_ig
from .corner_credit import CornerContext, iota_from_values, to_float, zero_credit, zeta_from_values
from .exceptions import RadixOverflow

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineConfig:
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    delta_override: Optional[float] = None
    efficiency_tol: float = 1e-5
    max_radix: int = 20

    def __post_init__(self):
        if self.efficiency_tol <= 0:
            raise ValueError(f"efficiency_tol must be positive, got {self.efficiency_tol}")
        if self.delta_override is not None and self.delta_override <= 0:
            raise ValueError(f"delta_override must be positive, got {self.delta_override}")
        if self.max_radix < 1:
            raise ValueError(f"max_radix must be >= 1, got {self.max_radix}")

    @classmethod
    def from_settings(cls, quadrature: Optional[QuadratureConfig] = None, **overrides) -> 'EngineConfig':
        values = {
            'efficiency_tol': getattr(settings, 'GIG_EFFICIENCY_TOL', 1e-5),
            'max_radix': getattr(settings, 'GIG_K_MAX', 20),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(quadrature=quadrature or QuadratureConfig.from_settings(), **values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EngineConfig':
        data = dict(data)
        quadrature = QuadratureConfig(**data.pop('quadrature', {}))
        return cls(quadrature=quadrature, **data)


@dataclass(frozen=True)
class ExplainRequest:
    query: PathQuery
    config: EngineConfig = field(default_factory=EngineConfig)


@dataclass
class Attribution:
    total: np.ndarray
    zeta_sum: np.ndarray
    iota_start: np.ndarray
    iota_end: np.ndarray
    integral: np.ndarray
    crossings_used: List[Tuple[float, int]]
    efficiency_residual: float
    f_start: float
    f_end: float
    delta: float = 1.0
    exact_discrete: Optional[np.ndarray] = field(default=None, repr=False)

    def within(self, tol: float) -> bool:
        return abs(self.efficiency_residual) <= tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            'total': self.total.tolist(),
            'zeta_sum': self.zeta_sum.tolist(),
            'iota_start': self.iota_start.tolist(),
            'iota_end': self.iota_end.tolist(),
            'integral': self.integral.tolist(),
            'crossings_used': [[a, k] for a, k in self.crossings_used],
            'efficiency_residual': self.efficiency_residual,
            'f_start': self.f_start,
            'f_end': self.f_end,
            'delta': self.delta,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Attribution':
        vec = lambda key: np.asarray(data[key], dtype=float)
        return cls(
            total=vec('total'), zeta_sum=vec('zeta_sum'), iota_start=vec('iota_start'),
            iota_end=vec('iota_end'), integral=vec('integral'),
            crossings_used=[(float(a), int(k)) for a, k in data.get('crossings_used', [])],
            efficiency_residual=float(data['efficiency_residual']),
            f_start=float(data['f_start']), f_end=float(data['f_end']),
            delta=float(data.get('delta', 1.0)),
        )


@dataclass
class ExplainFailure:
    """A batch item that could not be explained"""
    index: int
    error_type: str
    message: str
    exit_code: int

    def to_dict(self) -> Dict[str, Any]:
        return {'failed': True, **asdict(self)}


Outcome = Union[Attribution, ExplainFailure]


def outcome_from_dict(data: Dict[str, Any]) -> Outcome:
    """Inverse of Attribution.to_dict / ExplainFailure.to_dict"""
    if data.get('failed'):
        return ExplainFailure(int(data['index']), data['error_type'], data['message'], int(data['exit_code']))
    return Attribution.from_dict(data)


def zero_attribution(graph: CompositionGraph, q: PathQuery) -> Attribution:
    n = graph.n_features
    f_s = graph.evaluate(q.s)
    return Attribution(
        total=np.zeros(n), zeta_sum=np.zeros(n), iota_start=np.zeros(n), iota_end=np.zeros(n),
        integral=np.zeros(n), crossings_used=[], efficiency_residual=0.0, f_start=f_s, f_end=f_s,
        exact_discrete=zero_credit(n),
    )


def orthant_values_batch(graph: CompositionGraph, contexts: Sequence[CornerContext]) -> List[np.ndarray]:
    """Orthant values of many corners from a single batched evaluation"""
    if not contexts:
        return []
    probes = [ctx.probes() for ctx in contexts]
    X = np.concatenate([np.repeat(ctx.point[None, :], P.shape[0], axis=0) for ctx, P in zip(contexts, probes)])
    P = np.concatenate(probes)
    pinned = contexts[0].pinned_axes
    values = graph.evaluate_many(X, P, pinned, check_probes=True)
    out = []
    start = 0
    for block in probes:
        out.append(values[start:start + block.shape[0]])
        start += block.shape[0]
    return out


class AttributionEngine:
    """Explains paths for one immutable graph; safe to share between threads"""

    def __init__(self, graph: CompositionGraph, config: Optional[EngineConfig] = None):
        self.graph = graph
        self.config = config or EngineConfig()
        self.table: BoundaryTable = extract_boundaries(graph)

    def plan(self, q: PathQuery) -> Tuple[List[Crossing], float, List[int], List[int]]:
        """Crossings, safe step and the incident axes at s and e"""
        crossings = enumerate_crossings(self.table, q)
        pinned = q.pinned_axes
        start_axes = sorted(endpoint_radix(self.table, q.s) - pinned)
        end_axes = sorted(endpoint_radix(self.table, q.e) - pinned)
        worst = max([c.radix for c in crossings] + [len(start_axes), len(end_axes), 0])
        if worst > self.config.max_radix:
            raise RadixOverflow(worst, self.config.max_radix)
        delta = self.config.delta_override or safe_step(self.table, crossings, q)
        return crossings, delta, start_axes, end_axes

    def explain(self, q: PathQuery) -> Attribution:
        graph = self.graph
        n = graph.n_features
        if np.array_equal(q.s, q.e):
            return zero_attribution(graph, q)

        crossings, delta, start_axes, end_axes = self.plan(q)
        for c in crossings:
            logger.debug(f"Crossing at alpha={c.alpha:.12g} radix={c.radix} features={c.features}")

        corners = [CornerContext.at_crossing(graph, c, q, delta) for c in crossings]
        start_ctx = CornerContext.at_endpoint(graph, q.s, start_axes, q, delta)
        end_ctx = CornerContext.at_endpoint(graph, q.e, end_axes, q, delta)
        endpoint_ctxs = [ctx for ctx in (start_ctx, end_ctx) if ctx.radix]
        all_values = orthant_values_batch(graph, corners + endpoint_ctxs)
        corner_values = all_values[:len(corners)]
        endpoint_values = iter(all_values[len(corners):])
        start_values = next(endpoint_values) if start_ctx.radix else None
        end_values = next(endpoint_values) if end_ctx.radix else None

        f_s, f_e = graph.evaluate_many(np.stack([q.s, q.e]))

        zeta_sum = zero_credit(n)
        for ctx, values in zip(corners, corner_values):
            zeta_sum = zeta_sum + zeta_from_values(ctx, values)

        iota_start = (iota_from_values(start_ctx, start_values, f_s, 'start')
                      if start_ctx.radix else zero_credit(n))
        iota_end = (iota_from_values(end_ctx, end_values, f_e, 'end')
                    if end_ctx.radix else zero_credit(n))

        alphas = [0.0] + [c.alpha for c in crossings] + [1.0]
        integral = np.zeros(n)
        for lo, hi in zip(alphas[:-1], alphas[1:]):
            if hi > lo:
                integral = integral + segment_ig(graph, q, Segment.between(q, lo, hi), self.config.quadrature)

        discrete = zeta_sum + iota_start + iota_end
        exact_total = [d + Fraction(float(v)) for d, v in zip(discrete, integral)]
        total = np.array([float(t) for t in exact_total])
        residual = float(sum(exact_total, Fraction(0)) - (Fraction(float(f_e)) - Fraction(float(f_s))))

        attribution = Attribution(
            total=total,
            zeta_sum=to_float(zeta_sum),
            iota_start=to_float(iota_start),
            iota_end=to_float(iota_end),
            integral=integral,
            crossings_used=[(c.alpha, c.radix) for c in crossings],
            efficiency_residual=residual,
            f_start=float(f_s),
            f_end=float(f_e),
            delta=float(delta),
            exact_discrete=discrete,
        )
        if not attribution.within(self.config.efficiency_tol):
            logger.warning(
                f"⚠️  Efficiency residual {residual:.3e} exceeds tolerance {self.config.efficiency_tol:.1e}")
        return attribution


def explain(graph: CompositionGraph, req: ExplainRequest) -> Attribution:
    return AttributionEngine(graph, req.config).explain(req.query)


def _failure(index: int, exc: Exception) -> ExplainFailure:
    return ExplainFailure(index, type(exc).__name__, str(exc), exit_code_for(exc))


def explain_batch(graph: CompositionGraph, queries: Sequence[PathQuery], config: Optional[EngineConfig] = None,
                  jobs: int = 1, progress: bool = False) -> List[Outcome]:
    """Explain every query in order; a failing query yields an ExplainFailure and the batch continues"""
    engine = AttributionEngine(graph, config)

    def run(item: Tuple[int, PathQuery]) -> Outcome:
        index, q = item
        try:
            return engine.explain(q)
        except Exception as e:
            logger.warning(f"⚠️  Row {index} failed: {type(e).__name__}: {e}")
            return _failure(index, e)

    items = list(enumerate(queries))
    if not items:
        return []
    bar = tqdm(total=len(items), desc="explain", unit="row", disable=not progress)
    results: List[Outcome] = []
    try:
        if jobs <= 1:
            for item in items:
                results.append(run(item))
                bar.update(1)
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                for outcome in pool.map(run, items):
                    results.append(outcome)
                    bar.update(1)
    finally:
        bar.close()
    failed = sum(isinstance(r, ExplainFailure) for r in results)
    logger.info(f"📊 Explained {len(results) - failed}/{len(results)} rows ({failed} failed)")
    return results
