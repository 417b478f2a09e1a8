"""
Gradient-boosted decision trees on logistic loss.

Each round fits a regression tree to the residuals y - p with exact greedy
variance-reduction splits, then sets every leaf to a damped Newton step
scaled by the learning rate. No subsampling: identical data and params give
identical trees.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from model_ir.composition import ensemble_graph
from model_ir.exceptions import ArityMismatch
from model_ir.graph import CompositionGraph
from model_ir.nodes import Leaf, Split, TreeEnsemble, TreeNode

from .datasets import Dataset

logger = logging.getLogger(__name__)

LEAF_DAMPING = 1.0
MIN_SPLIT_GAIN = 1e-12


class DegenerateData(ValueError):
    """Training data cannot support a classifier (empty, one class, too few rows)"""


@dataclass(frozen=True)
class TrainParams:
    n_trees: int = 25
    max_depth: int = 6
    learning_rate: float = 0.1
    min_leaf: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be >= 1, got {self.min_leaf}")


@dataclass
class RoundStats:
    round: int
    loss: float
    accuracy: float
    leaves: int


@dataclass
class TrainingReport:
    params: TrainParams
    n_rows: int
    n_features: int
    base_score: float
    rounds: List[RoundStats] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.rounds[-1].loss if self.rounds else float('nan')

    @property
    def final_accuracy(self) -> float:
        return self.rounds[-1].accuracy if self.rounds else float('nan')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'params': asdict(self.params),
            'n_rows': self.n_rows,
            'n_features': self.n_features,
            'base_score': self.base_score,
            'final_loss': self.final_loss,
            'final_accuracy': self.final_accuracy,
            'rounds': [asdict(r) for r in self.rounds],
        }


def sigmoid(margin) -> np.ndarray:
    margin = np.asarray(margin, dtype=float)
    return np.exp(-np.logaddexp(0.0, -margin))


def logistic_loss(y: np.ndarray, margin: np.ndarray) -> float:
    """Mean negative log-likelihood, stable for large margins"""
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def _best_split(X: np.ndarray, g: np.ndarray, rows: np.ndarray, min_leaf: int) -> Optional[Tuple[int, float, np.ndarray]]:
    """(feature, threshold, left mask over rows) maximizing variance reduction, or None"""
    n = rows.size
    if n < 2 * min_leaf:
        return None
    g_rows = g[rows]
    if np.ptp(g_rows) == 0.0:
        return None
    total = g_rows.sum()
    parent = total * total / n
    best_gain, best = MIN_SPLIT_GAIN, None

    for feature in range(X.shape[1]):
        values = X[rows, feature]
        order = np.argsort(values, kind='stable')
        xs = values[order]
        left_sum = np.cumsum(g_rows[order])[:-1]
        left_n = np.arange(1, n)
        right_sum = total - left_sum
        right_n = n - left_n
        valid = (xs[:-1] < xs[1:]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        gain = left_sum ** 2 / left_n + right_sum ** 2 / right_n - parent
        gain = np.where(valid, gain, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] > best_gain:
            lo, hi = xs[pos], xs[pos + 1]
            threshold = 0.5 * (lo + hi)
            # the midpoint can round onto lo; hi still separates the two sides
            if not lo < threshold:
                threshold = hi
            best_gain, best = gain[pos], (feature, float(threshold))

    if best is None:
        return None
    feature, threshold = best
    return feature, threshold, X[rows, feature] < threshold


class GradientBoostingTrainer:
    """Boosts one TreeEnsemble; keeps per-round loss and accuracy in `report`"""

    def __init__(self, params: TrainParams):
        self.params = params
        self.report: Optional[TrainingReport] = None

    def _check(self, data: Dataset):
        if data.n_rows == 0:
            raise DegenerateData("Training data is empty")
        classes = np.unique(data.labels)
        if classes.size < 2:
            raise DegenerateData(f"Training data holds a single class: {classes.tolist()}")
        if data.n_rows < 2 * self.params.min_leaf:
            raise DegenerateData(f"Need at least {2 * self.params.min_leaf} rows, got {data.n_rows}")

    def _grow(self, X: np.ndarray, g: np.ndarray, h: np.ndarray, rows: np.ndarray, depth: int) -> TreeNode:
        split = None
        if depth < self.params.max_depth:
            split = _best_split(X, g, rows, self.params.min_leaf)
        if split is None:
            value = self.params.learning_rate * g[rows].sum() / (h[rows].sum() + LEAF_DAMPING)
            return Leaf(float(value))
        feature, threshold, goes_left = split
        return Split(
            feature, threshold,
            self._grow(X, g, h, rows[goes_left], depth + 1),
            self._grow(X, g, h, rows[~goes_left], depth + 1),
        )

    def fit(self, data: Dataset) -> TreeEnsemble:
        self._check(data)
        X, y = data.features, data.labels.astype(float)
        mean = y.mean()
        base_score = float(np.log(mean / (1.0 - mean)))
        self.report = TrainingReport(self.params, data.n_rows, data.n_features, base_score)

        margin = np.full(data.n_rows, base_score)
        trees: List[TreeNode] = []
        all_rows = np.arange(data.n_rows)
        for r in range(self.params.n_trees):
            p = sigmoid(margin)
            g = y - p
            h = p * (1.0 - p)
            tree = self._grow(X, g, h, all_rows, 0)
            trees.append(tree)
            margin = margin + TreeEnsemble((tree,)).predict(X)

            stats = RoundStats(
                round=r + 1,
                loss=logistic_loss(y, margin),
                accuracy=float(np.mean((margin >= 0.0) == (y == 1.0))),
                leaves=_count_leaves(tree),
            )
            self.report.rounds.append(stats)
            logger.debug(f"Round {stats.round}: loss={stats.loss:.6f} acc={stats.accuracy:.4f}")

        logger.info(f"🌲 Trained {len(trees)} trees (depth <= {self.params.max_depth}): "
                    f"loss={self.report.final_loss:.4f} accuracy={self.report.final_accuracy:.4f}")
        return TreeEnsemble(tuple(trees), base_score)


def _count_leaves(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return _count_leaves(node.left) + _count_leaves(node.right)


def train_gbm(data: Dataset, params: TrainParams) -> TreeEnsemble:
    return GradientBoostingTrainer(params).fit(data)


def predict_margin(ensemble: TreeEnsemble, X, n_features: Optional[int] = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    needed = ensemble.max_feature() + 1
    if X.shape[1] < needed or (n_features is not None and X.shape[1] != n_features):
        raise ArityMismatch(f"Ensemble reads {n_features or needed} features, rows have {X.shape[1]}")
    return ensemble.predict(X)


def predict_proba(ensemble: TreeEnsemble, X, n_features: Optional[int] = None) -> np.ndarray:
    return sigmoid(predict_margin(ensemble, X, n_features))


def to_graph(ensemble: TreeEnsemble, n_features: int) -> CompositionGraph:
    """The margin as a composition graph over n_features raw inputs"""
    return ensemble_graph(ensemble, n_features)


def roc_auc(labels, scores) -> float:
    """Rank-based AUC (Mann-Whitney U), average ranks for ties"""
    labels = np.asarray(labels).ravel()
    ranks = pd.Series(np.asarray(scores, dtype=float).ravel()).rank(method='average').to_numpy()
    positive = labels == 1
    n_pos, n_neg = int(positive.sum()), int((~positive).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateData("AUC needs both classes")
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
