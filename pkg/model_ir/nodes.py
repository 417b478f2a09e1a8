"""
Node types of a composition graph.

Every node produces a 2-D block of values shaped (rows, dim). Tree ensembles
are the only piecewise-constant parts; everything else is continuous.
"""
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

ACTIVATIONS = ('identity', 'relu', 'tanh', 'sigmoid', 'sin')


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


# -------------------------
# Trees
# -------------------------
@dataclass(frozen=True)
class Leaf:
    value: float

    def depth(self) -> int:
        return 0

    def map_leaves(self, fn: Callable[[float], float]) -> 'Leaf':
        return Leaf(float(fn(self.value)))


@dataclass(frozen=True)
class Split:
    """
    Internal tree node.

    Routing: a value goes left iff value < threshold, right iff value >= threshold.
    """
    feature: int
    threshold: float
    left: 'TreeNode'
    right: 'TreeNode'

    def depth(self) -> int:
        return 1 + max(self.left.depth(), self.right.depth())

    def map_leaves(self, fn: Callable[[float], float]) -> 'Split':
        return Split(self.feature, self.threshold, self.left.map_leaves(fn), self.right.map_leaves(fn))


TreeNode = Union[Split, Leaf]


class _FlatTree:
    """Array form of one tree, descended level by level for a whole batch"""

    def __init__(self, root: TreeNode):
        features: List[int] = []
        thresholds: List[float] = []
        left: List[int] = []
        right: List[int] = []
        values: List[float] = []

        def visit(node: TreeNode) -> int:
            idx = len(features)
            features.append(-1)
            thresholds.append(0.0)
            left.append(idx)
            right.append(idx)
            values.append(0.0)
            if isinstance(node, Leaf):
                values[idx] = node.value
            else:
                features[idx] = node.feature
                thresholds[idx] = node.threshold
                left[idx] = visit(node.left)
                right[idx] = visit(node.right)
            return idx

        visit(root)
        self.features = np.array(features, dtype=np.int64)
        self.thresholds = np.array(thresholds, dtype=float)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.values = np.array(values, dtype=float)
        self.depth = root.depth()

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.int64)
        for _ in range(self.depth):
            feat = self.features[node]
            is_split = feat >= 0
            if not is_split.any():
                break
            go_left = X[rows, np.maximum(feat, 0)] < self.thresholds[node]
            node = np.where(is_split, np.where(go_left, self.left[node], self.right[node]), node)
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.values[self.leaf_index(X)]


@dataclass(frozen=True)
class TreeEnsemble:
    """Sum of regression trees plus a base score; feature indices are local to the ensemble input"""
    trees: Tuple[TreeNode, ...]
    base_score: float = 0.0
    _flat: Tuple[_FlatTree, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'trees', tuple(self.trees))
        object.__setattr__(self, 'base_score', float(self.base_score))
        object.__setattr__(self, '_flat', tuple(_FlatTree(t) for t in self.trees))

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Margin for every row of X: base_score + sum of leaf values, trees added in order"""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], self.base_score)
        for flat in self._flat:
            out = out + flat.predict(X)
        return out

    def split_points(self) -> Dict[int, List[float]]:
        """Local feature index -> every threshold used on it (unsorted, with repeats)"""
        points: Dict[int, List[float]] = {}

        def visit(node: TreeNode):
            if isinstance(node, Split):
                points.setdefault(node.feature, []).append(node.threshold)
                visit(node.left)
                visit(node.right)

        for tree in self.trees:
            visit(tree)
        return points

    def max_feature(self) -> int:
        points = self.split_points()
        return max(points) if points else -1

    def map_leaves(self, fn: Callable[[float], float]) -> 'TreeEnsemble':
        return TreeEnsemble(tuple(t.map_leaves(fn) for t in self.trees), self.base_score)


# -------------------------
# Continuous parts
# -------------------------
@dataclass(frozen=True, eq=False)
class DenseLayer:
    weights: np.ndarray  # (in, out)
    bias: np.ndarray  # (out,)
    activation: str = 'identity'

    def __post_init__(self):
        object.__setattr__(self, 'weights', _frozen(np.atleast_2d(self.weights)))
        object.__setattr__(self, 'bias', _frozen(np.atleast_1d(self.bias)))

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == 'identity':
        return z
    if name == 'relu':
        return np.maximum(z, 0.0)
    if name == 'tanh':
        return np.tanh(z)
    if name == 'sigmoid':
        return 1.0 / (1.0 + np.exp(-z))
    if name == 'sin':
        return np.sin(z)
    raise ValueError(f"Unknown activation '{name}'")


def activation_slope(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation at z (a = activation(z)); ReLU takes the right derivative"""
    if name == 'identity':
        return np.ones_like(z)
    if name == 'relu':
        return (z >= 0.0).astype(float)
    if name == 'tanh':
        return 1.0 - a * a
    if name == 'sigmoid':
        return a * (1.0 - a)
    if name == 'sin':
        return np.cos(z)
    raise ValueError(f"Unknown activation '{name}'")


@dataclass(frozen=True, eq=False)
class PiecewiseLinearCurve:
    """Monotone piecewise-linear map, clamped to the end outputs outside the knot range"""
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'inputs', _frozen(self.inputs))
        object.__setattr__(self, 'outputs', _frozen(self.outputs))

    @classmethod
    def from_knots(cls, knots) -> 'PiecewiseLinearCurve':
        knots = np.asarray(knots, dtype=float).reshape(-1, 2)
        return cls(knots[:, 0], knots[:, 1])

    @property
    def knots(self) -> List[List[float]]:
        return [[float(a), float(b)] for a, b in zip(self.inputs, self.outputs)]

    def problems(self) -> List[str]:
        found = []
        if self.inputs.size < 2:
            found.append("curve needs at least 2 knots")
        if np.any(np.diff(self.inputs) <= 0):
            found.append("curve knot inputs must be strictly increasing")
        if np.any(np.diff(self.outputs) < 0):
            found.append("non-monotone curve")
        return found

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return np.interp(v, self.inputs, self.outputs)

    def derivative(self, v: np.ndarray) -> np.ndarray:
        """Slope of the active segment; right-derivative at knots, 0 outside the knot range"""
        v = np.asarray(v, dtype=float)
        slopes = np.diff(self.outputs) / np.diff(self.inputs)
        idx = np.searchsorted(self.inputs, v, side='right') - 1
        inside = (idx >= 0) & (idx < slopes.size)
        return np.where(inside, slopes[np.clip(idx, 0, slopes.size - 1)], 0.0)


# -------------------------
# Graph nodes
# -------------------------
@dataclass(frozen=True)
class Node:
    id: str
    inputs: Tuple[str, ...] = ()

    kind = 'node'

    def __post_init__(self):
        object.__setattr__(self, 'inputs', tuple(self.inputs))

    def renamed(self, mapping: Dict[str, str]) -> 'Node':
        return replace(self, id=mapping[self.id], inputs=tuple(mapping[i] for i in self.inputs))


@dataclass(frozen=True)
class InputNode(Node):
    features: Tuple[int, ...] = ()

    kind = 'input'

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, 'features', tuple(int(f) for f in self.features))


@dataclass(frozen=True)
class TreeEnsembleNode(Node):
    ensemble: Optional[TreeEnsemble] = None

    kind = 'tree_ensemble'


@dataclass(frozen=True)
class DenseNetworkNode(Node):
    layers: Tuple[DenseLayer, ...] = ()

    kind = 'dense_network'

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, 'layers', tuple(self.layers))


@dataclass(frozen=True)
class CurveNode(Node):
    curve: Optional[PiecewiseLinearCurve] = None

    kind = 'pwl_curve'


@dataclass(frozen=True, eq=False)
class LinearCombinerNode(Node):
    weights: np.ndarray = field(default_factory=lambda: _frozen([]))
    bias: float = 0.0

    kind = 'linear_combiner'

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, 'weights', _frozen(np.atleast_1d(self.weights)))
        object.__setattr__(self, 'bias', float(self.bias))


@dataclass(frozen=True)
class ProductNode(Node):
    """Multiplies every component of its (concatenated) input"""

    kind = 'product'


NODE_KINDS = {
    cls.kind: cls
    for cls in (InputNode, TreeEnsembleNode, DenseNetworkNode, CurveNode, LinearCombinerNode, ProductNode)
}
