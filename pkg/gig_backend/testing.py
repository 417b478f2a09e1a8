"""
Seeded factories for random models used across the app test suites.
"""
from typing import Optional, Sequence

import numpy as np

from calibration.ecdf import fit_ecdf
from model_ir.composition import compose, ensemble_graph
from model_ir.graph import CompositionGraph
from model_ir.nodes import (
    DenseLayer,
    DenseNetworkNode,
    InputNode,
    Leaf,
    LinearCombinerNode,
    PiecewiseLinearCurve,
    ProductNode,
    Split,
    TreeEnsemble,
    TreeNode,
)

GRID_THRESHOLDS = (0.25, 0.5, 0.75)


def random_tree(rng: np.random.Generator, n_features: int, depth: int,
                thresholds: Sequence[float] = GRID_THRESHOLDS) -> TreeNode:
    if depth == 0:
        return Leaf(float(np.round(rng.normal(), 3)))
    return Split(
        int(rng.integers(n_features)),
        float(rng.choice(thresholds)),
        random_tree(rng, n_features, depth - 1, thresholds),
        random_tree(rng, n_features, depth - 1, thresholds),
    )


def random_ensemble(rng: np.random.Generator, n_features: int, n_trees: int = 3, depth: int = 3,
                    thresholds: Sequence[float] = GRID_THRESHOLDS) -> TreeEnsemble:
    trees = tuple(random_tree(rng, n_features, depth, thresholds) for _ in range(n_trees))
    return TreeEnsemble(trees, float(np.round(rng.normal(), 3)))


def random_tree_graph(rng: np.random.Generator, n_features: int, **kwargs) -> CompositionGraph:
    return ensemble_graph(random_ensemble(rng, n_features, **kwargs), n_features)


def random_layers(rng: np.random.Generator, widths: Sequence[int], activation: str = 'tanh',
                  last_activation: str = 'identity') -> tuple:
    layers = []
    for pos, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        act = last_activation if pos == len(widths) - 2 else activation
        layers.append(DenseLayer(rng.normal(scale=0.8, size=(n_in, n_out)), rng.normal(scale=0.3, size=n_out), act))
    return tuple(layers)


def random_network_graph(rng: np.random.Generator, n_features: int, hidden: int = 4,
                         activation: str = 'tanh') -> CompositionGraph:
    nodes = [
        InputNode('x', features=tuple(range(n_features))),
        DenseNetworkNode('net', inputs=('x',), layers=random_layers(rng, [n_features, hidden, 1], activation)),
    ]
    return CompositionGraph(n_features, nodes, 'net')


def smooth_graph(rng: np.random.Generator, n_features: int) -> CompositionGraph:
    """Tree-free graph: a sin/tanh network plus the product of two features, linearly combined"""
    nodes = [
        InputNode('x', features=tuple(range(n_features))),
        InputNode('pair', features=(0, n_features - 1)),
        DenseNetworkNode('net', inputs=('x',), layers=random_layers(rng, [n_features, 3, 1], 'sin')),
        ProductNode('prod', inputs=('pair',)),
        LinearCombinerNode('out', inputs=('net', 'prod'), weights=rng.normal(size=2), bias=0.1),
    ]
    return CompositionGraph(n_features, nodes, 'out').ensure_valid()


def composed_graph(rng: np.random.Generator, n_features: int = 3, dense_combiner: bool = True,
                   calibrate: bool = True, n_scores: int = 2000) -> CompositionGraph:
    """
    Tree ensemble and tanh network, each through a fitted ECDF, joined by a
    combiner and a final ECDF.
    """
    trees = random_tree_graph(rng, n_features)
    net = random_network_graph(rng, n_features)
    sample = rng.uniform(size=(n_scores, n_features))
    parts = []
    for name, graph in (('gbm', trees), ('mlp', net)):
        curve = fit_ecdf(graph.evaluate_many(sample), 32).curve if calibrate else None
        parts.append((name, graph, curve))
    if dense_combiner:
        combiner = DenseNetworkNode('combiner', layers=random_layers(rng, [2, 3, 1]))
    else:
        combiner = LinearCombinerNode('combiner', weights=[0.7, 0.3])
    final_curve: Optional[PiecewiseLinearCurve] = None
    if calibrate:
        draft = compose(parts, combiner)
        final_curve = fit_ecdf(draft.evaluate_many(sample), 32).curve
    return compose(parts, combiner, final_curve)
