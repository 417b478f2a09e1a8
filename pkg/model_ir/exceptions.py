"""
Errors raised while building, loading or evaluating a composition graph
"""
from typing import Any, Dict, Optional


class GraphError(ValueError):
    """Base class for model graph failures"""


class ArityMismatch(GraphError):
    """Input vector length or node dimensions disagree with the graph"""


class NonFiniteValue(GraphError):
    """A NaN or infinity appeared in an input or intermediate value"""


class ProbeOnBoundary(GraphError):
    """A cell probe sits exactly on a split threshold"""


class ModelFormatError(GraphError):
    """A model, curve or compose document failed schema validation"""

    def __init__(self, message: str, errors: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.errors = errors or {}
