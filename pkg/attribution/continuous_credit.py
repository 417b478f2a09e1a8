"""
Integrated gradients over the continuous pieces of a path.

Each segment between consecutive crossings is integrated with composite
Gauss-Legendre quadrature while its tree ensembles stay fixed at the
segment's midpoint cell. Panels are bisected adaptively when the integrand
has kinks (piecewise-linear curves).
"""
import logging
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple

import numpy as np
from django.conf import settings

from model_ir.graph import CellAssignment, CompositionGraph, path_points

from .boundary import PathQuery, enumerate_crossings, extract_boundaries
from .exceptions import InvalidPath, QuadratureDivergence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureConfig:
    nodes_per_panel: int = 16
    panels: int = 8
    refine: Optional[bool] = None  # None: refine only when the graph has curve nodes
    refine_tol: float = 1e-8
    max_depth: int = 24

    def __post_init__(self):
        if self.nodes_per_panel < 2:
            raise ValueError(f"nodes_per_panel must be >= 2, got {self.nodes_per_panel}")
        if self.panels < 1:
            raise ValueError(f"panels must be >= 1, got {self.panels}")
        if self.refine_tol <= 0:
            raise ValueError(f"refine_tol must be positive, got {self.refine_tol}")
        if self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")

    @classmethod
    def from_settings(cls, **overrides) -> 'QuadratureConfig':
        values = {
            'nodes_per_panel': getattr(settings, 'GIG_QUAD_NODES', 16),
            'panels': getattr(settings, 'GIG_QUAD_PANELS', 8),
            'refine_tol': getattr(settings, 'GIG_QUAD_TOL', 1e-8),
            'max_depth': getattr(settings, 'GIG_QUAD_MAX_DEPTH', 24),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def refines(self, graph: CompositionGraph) -> bool:
        return graph.has_curves if self.refine is None else self.refine


@dataclass(frozen=True)
class Segment:
    """Open piece (alpha_lo, alpha_hi) of the path with one fixed cell"""
    alpha_lo: float
    alpha_hi: float
    cells: CellAssignment

    @classmethod
    def between(cls, q: PathQuery, lo: float, hi: float) -> 'Segment':
        if not lo < hi:
            raise InvalidPath(f"Empty segment [{lo}, {hi}]")
        probe = q.point(0.5 * (lo + hi))
        return cls(lo, hi, CellAssignment(probe, q.pinned_axes))


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


class _PanelIntegrator:
    """Integral of the gradient over alpha-panels of one segment"""

    def __init__(self, graph: CompositionGraph, q: PathQuery, seg: Segment, cfg: QuadratureConfig):
        self.graph = graph
        self.q = q
        self.cells = seg.cells
        self.cfg = cfg
        self.nodes, self.weights = gauss_legendre(cfg.nodes_per_panel)
        self.travel = q.travel
        self.depth_capped = 0
        self.panels_used = 0

    def panels(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Row k: integral over [a_k, b_k] of grad g(path(alpha), D(probe)) d alpha, one gradient call for all"""
        half = 0.5 * (b - a)
        alphas = (0.5 * (a + b))[:, None] + half[:, None] * self.nodes[None, :]
        X = path_points(self.q.s, self.q.e, alphas.ravel())
        P = np.broadcast_to(self.cells.probe, X.shape)
        G = self.graph.gradient_many(X, P, self.cells.pinned_axes)
        if not np.all(np.isfinite(G)):
            raise QuadratureDivergence(f"Non-finite gradient on alpha panels within [{a.min()}, {b.max()}]")
        self.panels_used += a.size
        G = G.reshape(a.size, self.nodes.size, -1)
        return half[:, None] * np.einsum('k,pkn->pn', self.weights, G)

    def integrate(self, lo: float, hi: float, refine: bool) -> np.ndarray:
        edges = np.linspace(lo, hi, self.cfg.panels + 1)
        a, b = edges[:-1], edges[1:]
        wholes = self.panels(a, b)
        if not refine:
            return wholes.sum(axis=0)

        # breadth-first bisection: every unresolved panel of a level shares one gradient call
        total = np.zeros(wholes.shape[1])
        depth = 1
        while a.size:
            mid = 0.5 * (a + b)
            halves = self.panels(np.concatenate([a, mid]), np.concatenate([mid, b]))
            left, right = halves[:a.size], halves[a.size:]
            refined = left + right
            done = np.max(np.abs(self.travel * (refined - wholes)), axis=1) <= self.cfg.refine_tol
            if depth >= self.cfg.max_depth:
                self.depth_capped += int(np.count_nonzero(~done))
                done[:] = True
            total += refined[done].sum(axis=0)
            open_ = ~done
            a, mid, b = a[open_], mid[open_], b[open_]
            wholes = np.concatenate([left[open_], right[open_]])
            a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
            depth += 1
        return total


def segment_ig(graph: CompositionGraph, q: PathQuery, seg: Segment, cfg: QuadratureConfig) -> np.ndarray:
    """(e_i - s_i) * integral over the segment of d_i g(path(alpha), D(probe)) d alpha"""
    n = graph.n_features
    moving = [i for i in graph.continuous_features if q.s[i] != q.e[i]]
    if not moving:
        return np.zeros(n)
    integrator = _PanelIntegrator(graph, q, seg, cfg)
    refine = cfg.refines(graph)
    integral = integrator.integrate(seg.alpha_lo, seg.alpha_hi, refine)
    if integrator.depth_capped:
        logger.warning(
            f"⚠️  Quadrature hit max depth {cfg.max_depth} on {integrator.depth_capped} panel(s) "
            f"of segment [{seg.alpha_lo:.6g}, {seg.alpha_hi:.6g}]")
    logger.debug(f"Segment [{seg.alpha_lo:.6g}, {seg.alpha_hi:.6g}] used {integrator.panels_used} panels")
    credit = q.travel * integral
    credit[q.s == q.e] = 0.0
    return credit


def ig_full_path(graph: CompositionGraph, q: PathQuery, cfg: QuadratureConfig) -> np.ndarray:
    """Plain integrated gradients from s to e; the path may not cross a split"""
    if np.array_equal(q.s, q.e):
        return np.zeros(graph.n_features)
    crossings = enumerate_crossings(extract_boundaries(graph), q)
    if crossings:
        raise InvalidPath(f"Path crosses {len(crossings)} discontinuities; use the attribution engine")
    return segment_ig(graph, q, Segment.between(q, 0.0, 1.0), cfg)
