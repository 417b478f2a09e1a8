"""
Smoothed ECDF: a monotone piecewise-linear curve through empirical quantiles,
mapping margin-space scores to approximate ranks in [0, 1].
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from model_ir.composition import curve_graph
from model_ir.graph import CompositionGraph
from model_ir.nodes import PiecewiseLinearCurve

logger = logging.getLogger(__name__)

DEFAULT_KNOT_COUNT = 64


class DegenerateScores(ValueError):
    """Scores cannot support a curve (fewer than 2 distinct finite values)"""


@dataclass(frozen=True)
class EcdfFit:
    samples_seen: int
    knot_count: int
    curve: PiecewiseLinearCurve

    def transform(self, score) -> np.ndarray:
        return self.curve(score)

    def derivative(self, score) -> np.ndarray:
        return self.curve.derivative(score)

    def to_graph(self) -> CompositionGraph:
        return curve_graph(self.curve)


def fit_ecdf(scores: Sequence[float], knot_count: int = DEFAULT_KNOT_COUNT) -> EcdfFit:
    """
    Knots at `knot_count` evenly spaced empirical quantiles.

    Tied quantiles collapse onto the last level that reaches them, so knot
    inputs are strictly increasing. The first output is pinned to 0 so the
    curve spans [0, 1] even when the minimum score is repeated.
    """
    if knot_count < 2:
        raise ValueError(f"knot_count must be >= 2, got {knot_count}")
    values = np.asarray(scores, dtype=float).ravel()
    if values.size and not np.all(np.isfinite(values)):
        raise DegenerateScores("Scores contain NaN or infinite values")
    if np.unique(values).size < 2:
        raise DegenerateScores(f"Need at least 2 distinct scores, got {np.unique(values).size}")

    levels = np.linspace(0.0, 1.0, knot_count)
    inputs = np.quantile(values, levels)
    # keep the last occurrence of every repeated quantile
    keep = np.append(np.diff(inputs) > 0, True)
    inputs, outputs = inputs[keep], levels[keep]
    outputs[0] = 0.0

    curve = PiecewiseLinearCurve(inputs, outputs)
    logger.info(f"📈 ECDF fitted on {values.size} scores: {inputs.size}/{knot_count} knots "
                f"over [{inputs[0]:.6g}, {inputs[-1]:.6g}]")
    return EcdfFit(samples_seen=int(values.size), knot_count=knot_count, curve=curve)


def transform(fit: EcdfFit, score) -> np.ndarray:
    return fit.transform(score)


def derivative(fit: EcdfFit, score) -> np.ndarray:
    return fit.derivative(score)
