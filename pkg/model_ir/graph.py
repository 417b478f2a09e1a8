"""
Composition graph: f(x) = g(x, D(x)).

Tree ensembles (D) read raw input features only and are evaluated at a cell
probe; every continuous node is evaluated on values flowing from x. With the
probe held fixed the output is a continuous function of x, and `gradient`
returns its exact chain-rule derivative (trees contribute nothing).
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .exceptions import ArityMismatch, GraphError, NonFiniteValue, ProbeOnBoundary
from .nodes import (
    ACTIVATIONS,
    CurveNode,
    DenseNetworkNode,
    InputNode,
    LinearCombinerNode,
    Node,
    ProductNode,
    TreeEnsembleNode,
    activate,
    activation_slope,
)

logger = logging.getLogger(__name__)


def as_feature_vector(values, n_features: int) -> np.ndarray:
    """Validate a point: 1-D, length n_features, every entry finite"""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape[0] != n_features:
        raise ArityMismatch(f"Expected {n_features} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue(f"Feature vector contains non-finite values: {x.tolist()}")
    return x


@dataclass(frozen=True)
class CellAssignment:
    """
    Probe point that selects the piecewise-constant branch values D(probe).

    Axes in `pinned_axes` are those where the whole path lies inside a split
    hyperplane; only there may the probe sit exactly on a threshold.
    """
    probe: np.ndarray
    pinned_axes: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        probe = np.array(self.probe, dtype=float)
        probe.setflags(write=False)
        object.__setattr__(self, 'probe', probe)
        object.__setattr__(self, 'pinned_axes', frozenset(int(a) for a in self.pinned_axes))


@dataclass(frozen=True)
class Diagnostic:
    node_id: Optional[str]
    message: str

    def __str__(self):
        return f"{self.node_id}: {self.message}" if self.node_id else self.message


class CompositionGraph:
    """Immutable DAG of model nodes with a single scalar output"""

    def __init__(self, n_features: int, nodes: Iterable[Node], output_id: str):
        self.n_features = int(n_features)
        self.nodes: Dict[str, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise GraphError(f"Duplicate node id '{node.id}'")
            self.nodes[node.id] = node
        self.output_id = output_id

    def __repr__(self):
        return f"CompositionGraph(n_features={self.n_features}, nodes={len(self.nodes)}, output='{self.output_id}')"

    # -------------------------
    # Structure
    # -------------------------
    @cached_property
    def order(self) -> Tuple[str, ...]:
        """Topological order (Kahn's algorithm, ties broken by declaration order)"""
        pending = {nid: len([i for i in n.inputs if i in self.nodes]) for nid, n in self.nodes.items()}
        consumers: Dict[str, List[str]] = {nid: [] for nid in self.nodes}
        for nid, node in self.nodes.items():
            for src in node.inputs:
                if src in consumers:
                    consumers[src].append(nid)
        ready = [nid for nid, count in pending.items() if count == 0]
        order: List[str] = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for dst in consumers[nid]:
                pending[dst] -= 1
                if pending[dst] == 0:
                    ready.append(dst)
        if len(order) != len(self.nodes):
            stuck = sorted(set(self.nodes) - set(order))
            raise GraphError(f"Graph contains a cycle through {stuck}")
        return tuple(order)

    @cached_property
    def dims(self) -> Dict[str, int]:
        """Output width of every node"""
        dims: Dict[str, int] = {}
        for nid in self.order:
            node = self.nodes[nid]
            if isinstance(node, InputNode):
                dims[nid] = len(node.features)
            elif isinstance(node, DenseNetworkNode):
                dims[nid] = node.layers[-1].n_out if node.layers else self._input_width(node, dims)
            else:
                dims[nid] = 1
        return dims

    def _input_width(self, node: Node, dims: Dict[str, int]) -> int:
        return sum(dims.get(src, 0) for src in node.inputs)

    @cached_property
    def tree_feature_maps(self) -> Dict[str, np.ndarray]:
        """Tree node id -> global feature index of each local ensemble input"""
        maps = {}
        for nid, node in self.nodes.items():
            if isinstance(node, TreeEnsembleNode):
                feats: List[int] = []
                for src in node.inputs:
                    src_node = self.nodes.get(src)
                    if isinstance(src_node, InputNode):
                        feats.extend(src_node.features)
                maps[nid] = np.array(feats, dtype=np.int64)
        return maps

    @cached_property
    def split_points(self) -> Dict[int, np.ndarray]:
        """Global feature index -> sorted, bitwise-deduplicated split thresholds"""
        collected: Dict[int, List[float]] = {}
        for nid, fmap in self.tree_feature_maps.items():
            ensemble = self.nodes[nid].ensemble
            for local, thresholds in ensemble.split_points().items():
                collected.setdefault(int(fmap[local]), []).extend(thresholds)
        points = {}
        for feature in sorted(collected):
            arr = np.unique(np.array(collected[feature], dtype=float))
            arr.setflags(write=False)
            points[feature] = arr
        return points

    @cached_property
    def continuous_features(self) -> FrozenSet[int]:
        """Features that reach the output through continuous nodes only"""
        reaches: Dict[str, Set[int]] = {}
        for nid in self.order:
            node = self.nodes[nid]
            if isinstance(node, InputNode):
                reaches[nid] = set(node.features)
            elif isinstance(node, TreeEnsembleNode):
                reaches[nid] = set()
            else:
                reaches[nid] = set().union(*(reaches.get(src, set()) for src in node.inputs))
        return frozenset(reaches.get(self.output_id, set()))

    @cached_property
    def read_features(self) -> FrozenSet[int]:
        """Features the output can depend on at all (through trees or continuous nodes)"""
        upstream = self._upstream(self.output_id)
        feats: Set[int] = set()
        for nid in upstream:
            node = self.nodes[nid]
            if isinstance(node, TreeEnsembleNode):
                fmap = self.tree_feature_maps[nid]
                feats.update(int(fmap[f]) for f in node.ensemble.split_points())
            elif isinstance(node, InputNode) and any(
                    not isinstance(self.nodes[c], TreeEnsembleNode)
                    for c in upstream if nid in self.nodes[c].inputs):
                feats.update(node.features)
        return frozenset(feats)

    def _upstream(self, nid: str) -> Set[str]:
        seen: Set[str] = set()
        stack = [nid]
        while stack:
            cur = stack.pop()
            if cur in seen or cur not in self.nodes:
                continue
            seen.add(cur)
            stack.extend(self.nodes[cur].inputs)
        return seen

    @property
    def has_trees(self) -> bool:
        return any(isinstance(n, TreeEnsembleNode) for n in self.nodes.values())

    @property
    def has_curves(self) -> bool:
        return any(isinstance(n, CurveNode) for n in self.nodes.values())

    # -------------------------
    # Validation
    # -------------------------
    def validate(self) -> List[Diagnostic]:
        """Structural problems of the graph; empty when well formed"""
        found: List[Diagnostic] = []
        if self.output_id not in self.nodes:
            found.append(Diagnostic(None, f"output node '{self.output_id}' does not exist"))
        for nid, node in self.nodes.items():
            for src in node.inputs:
                if src not in self.nodes:
                    found.append(Diagnostic(nid, f"reads unknown node '{src}'"))
        try:
            self.order
        except GraphError as e:
            found.append(Diagnostic(None, str(e)))
            return found
        if found:
            return found

        dims = self.dims
        for nid in self.order:
            node = self.nodes[nid]
            width = self._input_width(node, dims)
            if isinstance(node, InputNode):
                if node.inputs:
                    found.append(Diagnostic(nid, "input nodes take no inputs"))
                if not node.features:
                    found.append(Diagnostic(nid, "input node selects no features"))
                bad = [f for f in node.features if f < 0 or f >= self.n_features]
                if bad:
                    found.append(Diagnostic(nid, f"feature index out of range {bad} for arity {self.n_features}"))
            elif isinstance(node, TreeEnsembleNode):
                if any(not isinstance(self.nodes[src], InputNode) for src in node.inputs):
                    found.append(Diagnostic(nid, "tree must read raw inputs"))
                elif node.ensemble.max_feature() >= width:
                    found.append(Diagnostic(
                        nid, f"tree splits on local feature {node.ensemble.max_feature()} but reads only {width}"))
            elif isinstance(node, DenseNetworkNode):
                if not node.layers:
                    found.append(Diagnostic(nid, "network has no layers"))
                expected = width
                for pos, layer in enumerate(node.layers):
                    if layer.n_in != expected:
                        found.append(Diagnostic(nid, f"layer {pos} expects {layer.n_in} inputs, receives {expected}"))
                    if layer.bias.shape[0] != layer.n_out:
                        found.append(Diagnostic(nid, f"layer {pos} bias has {layer.bias.shape[0]} entries, needs {layer.n_out}"))
                    if layer.activation not in ACTIVATIONS:
                        found.append(Diagnostic(nid, f"layer {pos} has unknown activation '{layer.activation}'"))
                    expected = layer.n_out
            elif isinstance(node, CurveNode):
                if width != 1:
                    found.append(Diagnostic(nid, f"curve input must be 1-dimensional, got {width}"))
                found.extend(Diagnostic(nid, p) for p in node.curve.problems())
            elif isinstance(node, LinearCombinerNode):
                if node.weights.shape[0] != width:
                    found.append(Diagnostic(
                        nid, f"combiner has {node.weights.shape[0]} weights for {width} inputs"))
            elif isinstance(node, ProductNode):
                if width < 1:
                    found.append(Diagnostic(nid, "product node has no inputs"))
            if not isinstance(node, InputNode) and not node.inputs:
                found.append(Diagnostic(nid, "node has no inputs"))
        if self.output_id in dims and dims[self.output_id] != 1:
            found.append(Diagnostic(self.output_id, f"output must be scalar, has width {dims[self.output_id]}"))
        return found

    def ensure_valid(self) -> 'CompositionGraph':
        problems = self.validate()
        if problems:
            raise GraphError("; ".join(str(p) for p in problems))
        return self

    # -------------------------
    # Evaluation
    # -------------------------
    def _batch(self, X, P=None) -> Tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ArityMismatch(f"Expected {self.n_features} features, got shape {X.shape}")
        if P is None:
            P = X
        else:
            P = np.asarray(P, dtype=float)
            if P.ndim == 1:
                P = np.broadcast_to(P, X.shape)
            if P.shape != X.shape:
                raise ArityMismatch(f"Probe shape {P.shape} does not match inputs {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(P))):
            raise NonFiniteValue("Inputs or probes contain non-finite values")
        return X, P

    def check_probes(self, P: np.ndarray, pinned_axes: FrozenSet[int] = frozenset()):
        """Raise ProbeOnBoundary when a probe coordinate equals a threshold on a non-pinned axis"""
        P = np.atleast_2d(P)
        for feature, thresholds in self.split_points.items():
            if feature in pinned_axes:
                continue
            hit = np.isin(P[:, feature], thresholds)
            if hit.any():
                row = int(np.argmax(hit))
                raise ProbeOnBoundary(
                    f"Probe coordinate {P[row, feature]!r} lies on a split of feature {feature}")

    def _forward(self, X: np.ndarray, P: np.ndarray) -> Tuple[Dict[str, np.ndarray], Dict[str, list]]:
        values: Dict[str, np.ndarray] = {}
        cache: Dict[str, list] = {}
        for nid in self.order:
            node = self.nodes[nid]
            if isinstance(node, InputNode):
                out = X[:, list(node.features)]
            elif isinstance(node, TreeEnsembleNode):
                local = P[:, self.tree_feature_maps[nid]]
                out = node.ensemble.predict(local)[:, None]
            else:
                inp = np.concatenate([values[src] for src in node.inputs], axis=1)
                if isinstance(node, DenseNetworkNode):
                    layer_cache = []
                    a = inp
                    for layer in node.layers:
                        z = a @ layer.weights + layer.bias
                        nxt = activate(layer.activation, z)
                        layer_cache.append((a, z, nxt))
                        a = nxt
                    cache[nid] = layer_cache
                    out = a
                elif isinstance(node, CurveNode):
                    cache[nid] = [inp]
                    out = node.curve(inp[:, :1])
                elif isinstance(node, LinearCombinerNode):
                    out = (inp @ node.weights + node.bias)[:, None]
                elif isinstance(node, ProductNode):
                    cache[nid] = [inp]
                    out = np.prod(inp, axis=1, keepdims=True)
                else:
                    raise GraphError(f"Unsupported node kind '{node.kind}'")
            if not np.all(np.isfinite(out)):
                raise NonFiniteValue(f"Node '{nid}' produced a non-finite value")
            values[nid] = out
        return values, cache

    def evaluate_many(self, X, P=None, pinned_axes: FrozenSet[int] = frozenset(),
                      check_probes: bool = False) -> np.ndarray:
        """g(X, D(P)) row by row; P defaults to X (plain evaluation)"""
        X, P = self._batch(X, P)
        if check_probes:
            self.check_probes(P, pinned_axes)
        values, _ = self._forward(X, P)
        return values[self.output_id][:, 0].copy()

    def evaluate(self, x) -> float:
        """f(x) = g(x, D(x)); a value on a threshold routes right"""
        x = as_feature_vector(x, self.n_features)
        return float(self.evaluate_many(x[None, :])[0])

    def evaluate_split(self, x, cells: CellAssignment) -> float:
        """g(x, D(probe)): continuous nodes at x, tree ensembles at the probe"""
        x = as_feature_vector(x, self.n_features)
        probe = as_feature_vector(cells.probe, self.n_features)
        return float(self.evaluate_many(x[None, :], probe[None, :], cells.pinned_axes, check_probes=True)[0])

    def gradient_many(self, X, P=None, pinned_axes: FrozenSet[int] = frozenset()) -> np.ndarray:
        """Reverse sweep of d g(x, D(p)) / dx for every row, probes held fixed"""
        X, P = self._batch(X, P)
        values, cache = self._forward(X, P)
        m = X.shape[0]
        grads: Dict[str, np.ndarray] = {self.output_id: np.ones((m, 1))}
        grad_x = np.zeros_like(X)
        for nid in reversed(self.order):
            if nid not in grads:
                continue
            node = self.nodes[nid]
            g_out = grads.pop(nid)
            if isinstance(node, InputNode):
                for col, feature in enumerate(node.features):
                    grad_x[:, feature] += g_out[:, col]
                continue
            if isinstance(node, TreeEnsembleNode):
                continue
            if isinstance(node, DenseNetworkNode):
                g = g_out
                for layer, (a, z, nxt) in zip(reversed(node.layers), reversed(cache[nid])):
                    g = (g * activation_slope(layer.activation, z, nxt)) @ layer.weights.T
                g_in = g
            elif isinstance(node, CurveNode):
                inp = cache[nid][0]
                g_in = g_out * node.curve.derivative(inp[:, :1])
            elif isinstance(node, LinearCombinerNode):
                g_in = g_out * node.weights[None, :]
            elif isinstance(node, ProductNode):
                inp = cache[nid][0]
                g_in = np.empty_like(inp)
                for j in range(inp.shape[1]):
                    g_in[:, j] = np.prod(np.delete(inp, j, axis=1), axis=1)
                g_in = g_out * g_in
            else:
                raise GraphError(f"Unsupported node kind '{node.kind}'")
            start = 0
            for src in node.inputs:
                width = values[src].shape[1]
                piece = g_in[:, start:start + width]
                grads[src] = grads[src] + piece if src in grads else piece
                start += width
        return grad_x

    def gradient(self, x, cells: Optional[CellAssignment] = None) -> np.ndarray:
        """Exact gradient of g(., D(probe)) at x; probe defaults to x"""
        x = as_feature_vector(x, self.n_features)
        if cells is None:
            return self.gradient_many(x[None, :])[0]
        probe = as_feature_vector(cells.probe, self.n_features)
        return self.gradient_many(x[None, :], probe[None, :], cells.pinned_axes)[0]


def path_points(s: np.ndarray, e: np.ndarray, alphas: Sequence[float]) -> np.ndarray:
    """Rows s + a * (e - s) for every a; axes with s_i == e_i stay exactly at s_i"""
    s = np.asarray(s, dtype=float)
    e = np.asarray(e, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    points = s[None, :] + alphas[:, None] * (e - s)[None, :]
    pinned = s == e
    points[:, pinned] = s[pinned]
    points[alphas == 0.0] = s
    points[alphas == 1.0] = e
    return points
