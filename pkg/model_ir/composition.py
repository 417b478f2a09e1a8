"""
Graph algebra: wrapping ensembles, namespacing sub-graphs and stacking them
behind a combiner, optional calibration curves in between.
"""
import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple, Union

from .exceptions import ArityMismatch, GraphError
from .graph import CompositionGraph
from .nodes import (
    CurveNode,
    DenseNetworkNode,
    InputNode,
    LinearCombinerNode,
    Node,
    PiecewiseLinearCurve,
    TreeEnsemble,
    TreeEnsembleNode,
)

logger = logging.getLogger(__name__)

Combiner = Union[LinearCombinerNode, DenseNetworkNode]


def ensemble_graph(ensemble: TreeEnsemble, n_features: int) -> CompositionGraph:
    """Single tree ensemble reading features 0..n-1 in order"""
    nodes = [
        InputNode('x', features=tuple(range(n_features))),
        TreeEnsembleNode('trees', inputs=('x',), ensemble=ensemble),
    ]
    return CompositionGraph(n_features, nodes, 'trees')


def curve_graph(curve: PiecewiseLinearCurve) -> CompositionGraph:
    """One-feature graph applying a curve; the on-disk form of a fitted ECDF"""
    nodes = [InputNode('score', features=(0,)), CurveNode('ecdf', inputs=('score',), curve=curve)]
    return CompositionGraph(1, nodes, 'ecdf')


def namespaced(graph: CompositionGraph, prefix: str) -> List[Node]:
    """Nodes of `graph` with ids rewritten to '<prefix>/<id>'"""
    mapping = {nid: f"{prefix}/{nid}" for nid in graph.nodes}
    return [graph.nodes[nid].renamed(mapping) for nid in graph.nodes]


def _common_arity(graphs: Sequence[CompositionGraph]) -> int:
    arities = {g.n_features for g in graphs}
    if len(arities) != 1:
        raise ArityMismatch(f"Sub-models disagree on the number of features: {sorted(arities)}")
    return arities.pop()


def compose(parts: Sequence[Tuple[str, CompositionGraph, Optional[PiecewiseLinearCurve]]],
            combiner: Combiner,
            final_curve: Optional[PiecewiseLinearCurve] = None) -> CompositionGraph:
    """
    Stack named sub-models, each optionally calibrated, behind a combiner.

    `combiner` is a node template whose id and inputs are replaced; its input
    width must equal the number of parts.
    """
    if not parts:
        raise GraphError("Nothing to compose")
    n_features = _common_arity([g for _, g, _ in parts])
    nodes: List[Node] = []
    heads: List[str] = []
    for name, graph, curve in parts:
        if '/' in name:
            raise GraphError(f"Sub-model name '{name}' may not contain '/'")
        nodes.extend(namespaced(graph, name))
        head = f"{name}/{graph.output_id}"
        if curve is not None:
            nodes.append(CurveNode(f"{name}/ecdf", inputs=(head,), curve=curve))
            head = f"{name}/ecdf"
        heads.append(head)

    nodes.append(replace(combiner, id='combiner', inputs=tuple(heads)))
    output = 'combiner'
    if final_curve is not None:
        nodes.append(CurveNode('final_ecdf', inputs=('combiner',), curve=final_curve))
        output = 'final_ecdf'
    graph = CompositionGraph(n_features, nodes, output)
    logger.info(f"🧩 Composed {len(parts)} sub-models into {graph}")
    return graph.ensure_valid()


def linear_combination(graphs: Sequence[CompositionGraph], weights: Sequence[float],
                       bias: float = 0.0) -> CompositionGraph:
    """sum_k weights[k] * graphs[k] + bias"""
    if len(graphs) != len(weights):
        raise ArityMismatch(f"{len(graphs)} graphs but {len(weights)} weights")
    parts = [(f"g{k}", g, None) for k, g in enumerate(graphs)]
    return compose(parts, LinearCombinerNode('combiner', weights=list(weights), bias=bias))


def permute_features(graph: CompositionGraph, perm: Sequence[int]) -> CompositionGraph:
    """Relabel input feature i as perm[i]; credits of the result are those of `graph` moved the same way"""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(graph.n_features)):
        raise ArityMismatch(f"{perm} is not a permutation of {graph.n_features} features")
    nodes = []
    for nid in graph.nodes:
        node = graph.nodes[nid]
        if isinstance(node, InputNode):
            node = replace(node, features=tuple(perm[f] for f in node.features))
        nodes.append(node)
    return CompositionGraph(graph.n_features, nodes, graph.output_id)


def linear_model(weights: Sequence[float], bias: float = 0.0) -> CompositionGraph:
    n = len(weights)
    nodes = [
        InputNode('x', features=tuple(range(n))),
        LinearCombinerNode('linear', inputs=('x',), weights=list(weights), bias=bias),
    ]
    return CompositionGraph(n, nodes, 'linear')
