"""
JSON model documents <-> CompositionGraph.

Document shape (see docs/model-format.md):
    {"version": 1, "n_features": n, "output_id": "...", "nodes": [{"id", "kind", "inputs", ...}]}
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List

from rest_framework import serializers

from .composition import compose
from .exceptions import ModelFormatError
from .graph import CompositionGraph
from .nodes import (
    ACTIVATIONS,
    NODE_KINDS,
    CurveNode,
    DenseLayer,
    DenseNetworkNode,
    InputNode,
    Leaf,
    LinearCombinerNode,
    Node,
    PiecewiseLinearCurve,
    ProductNode,
    Split,
    TreeEnsemble,
    TreeEnsembleNode,
    TreeNode,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class TreeField(serializers.Field):
    """Nested {split: {feature, threshold}, left, right} / {leaf: value}"""

    default_error_messages = {
        'invalid': 'Tree nodes must be {"leaf": v} or {"split": {...}, "left": ..., "right": ...}.',
    }

    def to_internal_value(self, data) -> TreeNode:
        return self._parse(data, path='tree')

    def _parse(self, data, path: str) -> TreeNode:
        if not isinstance(data, dict):
            raise serializers.ValidationError(f"{path}: expected an object")
        if 'leaf' in data:
            return Leaf(self._number(data['leaf'], f"{path}.leaf"))
        if 'split' not in data or 'left' not in data or 'right' not in data:
            self.fail('invalid')
        split = data['split']
        if not isinstance(split, dict) or 'feature' not in split or 'threshold' not in split:
            raise serializers.ValidationError(f"{path}.split: needs feature and threshold")
        feature = split['feature']
        if isinstance(feature, bool) or not isinstance(feature, int) or feature < 0:
            raise serializers.ValidationError(f"{path}.split.feature: expected a non-negative integer")
        return Split(
            feature,
            self._number(split['threshold'], f"{path}.split.threshold"),
            self._parse(data['left'], f"{path}.left"),
            self._parse(data['right'], f"{path}.right"),
        )

    @staticmethod
    def _number(value, path: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise serializers.ValidationError(f"{path}: expected a number")
        value = float(value)
        if value != value or value in (float('inf'), float('-inf')):
            raise serializers.ValidationError(f"{path}: must be finite")
        return value

    def to_representation(self, node: TreeNode) -> Dict[str, Any]:
        if isinstance(node, Leaf):
            return {'leaf': node.value}
        return {
            'split': {'feature': node.feature, 'threshold': node.threshold},
            'left': self.to_representation(node.left),
            'right': self.to_representation(node.right),
        }


class LayerSerializer(serializers.Serializer):
    weights = serializers.ListField(child=serializers.ListField(child=serializers.FloatField(), allow_empty=False),
                                    allow_empty=False)
    bias = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    activation = serializers.ChoiceField(choices=ACTIVATIONS, default='identity')

    def validate_weights(self, value):
        widths = {len(row) for row in value}
        if len(widths) != 1:
            raise serializers.ValidationError("weight rows must all have the same length")
        return value

    def validate(self, attrs):
        if len(attrs['bias']) != len(attrs['weights'][0]):
            raise serializers.ValidationError("bias length must equal the layer output width")
        return attrs


class NodeSerializer(serializers.Serializer):
    id = serializers.CharField()
    kind = serializers.ChoiceField(choices=list(NODE_KINDS))
    inputs = serializers.ListField(child=serializers.CharField(), required=False, default=list)

    # kind-specific payloads
    features = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False)
    trees = serializers.ListField(child=TreeField(), required=False)
    base_score = serializers.FloatField(required=False, default=0.0)
    layers = LayerSerializer(many=True, required=False)
    knots = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2),
        required=False, min_length=2)
    weights = serializers.ListField(child=serializers.FloatField(), required=False)
    bias = serializers.FloatField(required=False, default=0.0)

    REQUIRED = {
        'input': ('features',),
        'tree_ensemble': ('trees',),
        'dense_network': ('layers',),
        'pwl_curve': ('knots',),
        'linear_combiner': ('weights',),
        'product': (),
    }

    def validate(self, attrs):
        missing = [name for name in self.REQUIRED[attrs['kind']] if name not in attrs]
        if missing:
            raise serializers.ValidationError(
                {name: f"required for kind '{attrs['kind']}'" for name in missing})
        return attrs


class ModelDocumentSerializer(serializers.Serializer):
    version = serializers.IntegerField(min_value=1, max_value=FORMAT_VERSION)
    n_features = serializers.IntegerField(min_value=1)
    output_id = serializers.CharField()
    nodes = NodeSerializer(many=True, allow_empty=False)


# -------------------------
# Conversion
# -------------------------
def _node_from_attrs(attrs: Dict[str, Any]) -> Node:
    kind = attrs['kind']
    common = {'id': attrs['id'], 'inputs': tuple(attrs.get('inputs', ()))}
    if kind == 'input':
        return InputNode(features=tuple(attrs['features']), **common)
    if kind == 'tree_ensemble':
        return TreeEnsembleNode(ensemble=TreeEnsemble(tuple(attrs['trees']), attrs['base_score']), **common)
    if kind == 'dense_network':
        layers = tuple(DenseLayer(l['weights'], l['bias'], l['activation']) for l in attrs['layers'])
        return DenseNetworkNode(layers=layers, **common)
    if kind == 'pwl_curve':
        return CurveNode(curve=PiecewiseLinearCurve.from_knots(attrs['knots']), **common)
    if kind == 'linear_combiner':
        return LinearCombinerNode(weights=attrs['weights'], bias=attrs['bias'], **common)
    return ProductNode(**common)


def graph_from_document(doc: Dict[str, Any], check: bool = True) -> CompositionGraph:
    """Validate a model document and build its graph; schema or structure problems raise ModelFormatError"""
    serializer = ModelDocumentSerializer(data=doc)
    if not serializer.is_valid():
        raise ModelFormatError(f"Invalid model document: {serializer.errors}", serializer.errors)
    data = serializer.validated_data
    try:
        graph = CompositionGraph(data['n_features'], [_node_from_attrs(n) for n in data['nodes']], data['output_id'])
    except ValueError as e:
        raise ModelFormatError(str(e)) from e
    if check:
        problems = graph.validate()
        if problems:
            raise ModelFormatError(
                "Model graph is not valid: " + "; ".join(str(p) for p in problems),
                {'graph': [str(p) for p in problems]})
    return graph


def _node_document(node: Node) -> Dict[str, Any]:
    doc: Dict[str, Any] = {'id': node.id, 'kind': node.kind}
    if node.inputs:
        doc['inputs'] = list(node.inputs)
    if isinstance(node, InputNode):
        doc['features'] = list(node.features)
    elif isinstance(node, TreeEnsembleNode):
        field = TreeField()
        doc['base_score'] = node.ensemble.base_score
        doc['trees'] = [field.to_representation(t) for t in node.ensemble.trees]
    elif isinstance(node, DenseNetworkNode):
        doc['layers'] = [
            {'weights': layer.weights.tolist(), 'bias': layer.bias.tolist(), 'activation': layer.activation}
            for layer in node.layers
        ]
    elif isinstance(node, CurveNode):
        doc['knots'] = node.curve.knots
    elif isinstance(node, LinearCombinerNode):
        doc['weights'] = node.weights.tolist()
        doc['bias'] = node.bias
    return doc


def graph_to_document(graph: CompositionGraph) -> Dict[str, Any]:
    return {
        'version': FORMAT_VERSION,
        'n_features': graph.n_features,
        'output_id': graph.output_id,
        'nodes': [_node_document(graph.nodes[nid]) for nid in graph.nodes],
    }


def read_model(path) -> CompositionGraph:
    with open(path, 'r', encoding='utf-8') as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"{path} is not valid JSON: {e}") from e
    graph = graph_from_document(doc)
    logger.debug(f"Loaded {graph} from {path}")
    return graph


def write_model(graph: CompositionGraph, path) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, 'w', encoding='utf-8') as f:
        json.dump(graph_to_document(graph), f, indent=1)
        f.write('\n')
    logger.info(f"💾 Model written to {out}")


def curve_from_document(doc: Dict[str, Any]) -> PiecewiseLinearCurve:
    """The single pwl_curve node of a curve document (as written by fit_ecdf)"""
    graph = graph_from_document(doc)
    curves: List[CurveNode] = [n for n in graph.nodes.values() if isinstance(n, CurveNode)]
    if len(curves) != 1:
        raise ModelFormatError(f"Curve document must hold exactly one pwl_curve node, found {len(curves)}")
    return curves[0].curve


# -------------------------
# Compose specs
# -------------------------
class SubmodelSerializer(serializers.Serializer):
    name = serializers.RegexField(r'^[A-Za-z0-9_.-]+$')
    model = serializers.CharField()
    ecdf = serializers.CharField(required=False, allow_null=True, default=None)


class CombinerSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=['linear_combiner', 'dense_network'])
    weights = serializers.ListField(child=serializers.FloatField(), required=False)
    bias = serializers.FloatField(required=False, default=0.0)
    layers = LayerSerializer(many=True, required=False)

    def validate(self, attrs):
        needed = 'weights' if attrs['kind'] == 'linear_combiner' else 'layers'
        if needed not in attrs:
            raise serializers.ValidationError({needed: f"required for kind '{attrs['kind']}'"})
        return attrs


class ComposeSpecSerializer(serializers.Serializer):
    version = serializers.IntegerField(min_value=1, max_value=FORMAT_VERSION, default=FORMAT_VERSION)
    submodels = SubmodelSerializer(many=True, allow_empty=False)
    combiner = CombinerSerializer()
    final_ecdf = serializers.CharField(required=False, allow_null=True, default=None)

    def validate_submodels(self, value):
        names = [s['name'] for s in value]
        if len(set(names)) != len(names):
            raise serializers.ValidationError("sub-model names must be unique")
        return value


def graph_from_compose_spec(doc: Dict[str, Any], base_dir=None) -> CompositionGraph:
    """
    Build a composed graph from a compose spec.

    Model and curve paths are resolved against `base_dir` (the spec file's directory).
    """
    serializer = ComposeSpecSerializer(data=doc)
    if not serializer.is_valid():
        raise ModelFormatError(f"Invalid compose spec: {serializer.errors}", serializer.errors)
    data = serializer.validated_data
    base = Path(base_dir or '.')

    def load_curve(path):
        if path is None:
            return None
        with open(base / path, 'r', encoding='utf-8') as f:
            return curve_from_document(json.load(f))

    parts = [(s['name'], read_model(base / s['model']), load_curve(s['ecdf'])) for s in data['submodels']]
    spec = data['combiner']
    if spec['kind'] == 'linear_combiner':
        combiner = LinearCombinerNode('combiner', weights=spec['weights'], bias=spec['bias'])
    else:
        layers = tuple(DenseLayer(l['weights'], l['bias'], l['activation']) for l in spec['layers'])
        combiner = DenseNetworkNode('combiner', layers=layers)
    return compose(parts, combiner, load_curve(data['final_ecdf']))
