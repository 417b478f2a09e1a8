"""
Errors raised while computing attributions
"""


class AttributionError(ArithmeticError):
    """Base class for attribution failures"""


class RadixOverflow(AttributionError):
    """More hyperplanes meet at one point than the corner machinery supports"""

    def __init__(self, radix: int, max_radix: int):
        super().__init__(f"Radix {radix} exceeds the supported maximum of {max_radix}")
        self.radix = radix
        self.max_radix = max_radix


class QuadratureDivergence(AttributionError):
    """A gradient evaluated at a quadrature node was not finite"""


class InvalidPath(AttributionError):
    """The requested path is not admissible for this operation"""
