"""
Discrete credit at discontinuities.

Corner weights are exact rationals: eta(k, j) = j!(k-j-1)!/k!, the Shapley
ordering coefficients. A corner where k hyperplanes meet is scored by
evaluating the model in each of the 2^k orthants around it (signs taken
relative to the direction of travel) and weighting those values with
`orthant_weight_vector`. `shapley_lift_oracle` recomputes the same credit as
the exact Shapley value of the perturbation lift, independently of the
weight rule.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from model_ir.graph import CompositionGraph

from .boundary import Crossing, PathQuery
from .exceptions import RadixOverflow

logger = logging.getLogger(__name__)

MAX_SHAPLEY_PLAYERS = 20


def k_max() -> int:
    return getattr(settings, 'GIG_K_MAX', 20)


# -------------------------
# eta coefficients
# -------------------------
@lru_cache(maxsize=None)
def _eta_closed(k: int, j: int) -> Fraction:
    return Fraction(factorial(j) * factorial(k - j - 1), factorial(k))


def eta(k: int, j: int, limit: Optional[int] = None) -> Fraction:
    """j!(k-j-1)!/k! for 0 <= j < k <= limit (GIG_K_MAX by default)"""
    limit = k_max() if limit is None else limit
    if k > limit:
        raise RadixOverflow(k, limit)
    if k < 1:
        raise ValueError(f"eta needs k >= 1, got {k}")
    if not 0 <= j < k:
        raise ValueError(f"eta needs 0 <= j < k, got k={k}, j={j}")
    return _eta_closed(k, j)


@lru_cache(maxsize=None)
def eta_by_recursion(k: int, j: int) -> Fraction:
    """eta(k, j) = eta(k-j, 0) - sum_{p<j} C(j, p) eta(k, p), with eta(m, 0) = 1/m"""
    value = Fraction(1, k - j)
    for p in range(j):
        value -= comb(j, p) * eta_by_recursion(k, p)
    return value


@dataclass(frozen=True)
class EtaTable:
    """All eta(k, j) for k <= k_max, exact"""
    k_max: int
    entries: Dict[Tuple[int, int], Fraction] = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, k_max_value: Optional[int] = None) -> 'EtaTable':
        k_max_value = k_max() if k_max_value is None else k_max_value
        entries = {(k, j): _eta_closed(k, j) for k in range(1, k_max_value + 1) for j in range(k)}
        return cls(k_max_value, entries)

    def __getitem__(self, key: Tuple[int, int]) -> Fraction:
        return self.entries[key]

    def recursion_mismatches(self) -> List[Tuple[int, int]]:
        """(k, j) pairs where closed form and recursion disagree; empty when consistent"""
        bad = []
        for (k, j), value in self.entries.items():
            expected = Fraction(1, k - j) - sum(
                (comb(j, p) * self.entries[(k, p)] for p in range(j)), Fraction(0))
            if expected != value:
                bad.append((k, j))
        return bad


def orthant_weight_vector(k: int, mismatch: Iterable[int]) -> List[Fraction]:
    """
    Weights of one orthant's value in the corner credit.

    `mismatch` holds 0-based axes whose side disagrees with the travel
    direction. With j = |mismatch|, matched axes get +eta(k, j) and
    mismatched axes get -eta(k, j - 1).
    """
    mismatch = frozenset(mismatch)
    if any(a < 0 or a >= k for a in mismatch):
        raise ValueError(f"mismatch axes {sorted(mismatch)} out of range for k={k}")
    j = len(mismatch)
    plus = eta(k, j) if j < k else Fraction(0)
    minus = eta(k, j - 1) if j >= 1 else Fraction(0)
    return [-minus if axis in mismatch else plus for axis in range(k)]


def _mask_weights(k: int, mask: int) -> List[Fraction]:
    """orthant_weight_vector for the orthant whose mismatched axes are the set bits of `mask`"""
    return orthant_weight_vector(k, [a for a in range(k) if mask >> a & 1])


# -------------------------
# Corners
# -------------------------
@dataclass(frozen=True)
class CornerContext:
    """
    A point where `features` sit on hyperplanes, with the path's travel signs on them.

    Probes displace the point by +/- delta along those features only.
    """
    graph: CompositionGraph
    point: np.ndarray
    features: Tuple[int, ...]
    travel_signs: np.ndarray
    delta: float
    pinned_axes: FrozenSet[int] = frozenset()

    @classmethod
    def at_crossing(cls, graph: CompositionGraph, crossing: Crossing, q: PathQuery, delta: float) -> 'CornerContext':
        return cls(graph, crossing.point, crossing.features, q.travel_signs[list(crossing.features)],
                   delta, q.pinned_axes)

    @classmethod
    def at_endpoint(cls, graph: CompositionGraph, x: np.ndarray, features: Sequence[int], q: PathQuery,
                    delta: float) -> 'CornerContext':
        features = tuple(sorted(features))
        return cls(graph, np.asarray(x, dtype=float), features, q.travel_signs[list(features)],
                   delta, q.pinned_axes)

    @property
    def radix(self) -> int:
        return len(self.features)

    def check_radix(self, max_radix: Optional[int] = None):
        limit = k_max() if max_radix is None else max_radix
        if self.radix > limit:
            raise RadixOverflow(self.radix, limit)

    def probes(self) -> np.ndarray:
        """Row `mask`: point moved toward e on axes whose bit is clear, toward s where it is set"""
        k = self.radix
        masks = np.arange(1 << k)[:, None]
        bits = (masks >> np.arange(k)[None, :]) & 1
        sides = np.where(bits == 1, -1.0, 1.0) * self.travel_signs[None, :]
        P = np.repeat(self.point[None, :], 1 << k, axis=0)
        P[:, list(self.features)] += self.delta * sides
        return P

    def orthant_values(self) -> np.ndarray:
        P = self.probes()
        X = np.repeat(self.point[None, :], P.shape[0], axis=0)
        return self.graph.evaluate_many(X, P, self.pinned_axes, check_probes=True)

    def embed(self, credit: Sequence[Fraction]) -> np.ndarray:
        out = zero_credit(self.graph.n_features)
        for axis, value in zip(self.features, credit):
            out[axis] = value
        return out


def zero_credit(n: int) -> np.ndarray:
    out = np.empty(n, dtype=object)
    out[:] = [Fraction(0)] * n
    return out


def zeta_from_values(ctx: CornerContext, values: Sequence[float]) -> np.ndarray:
    """Corner credit from the 2^k orthant values (indexed like CornerContext.probes)"""
    k = ctx.radix
    credit = [Fraction(0)] * k
    for mask, value in enumerate(values):
        v = Fraction(float(value))
        if v == 0:
            continue
        row = _mask_weights(k, mask)
        for axis in range(k):
            credit[axis] += row[axis] * v
    return ctx.embed(credit)


def zeta(ctx: CornerContext) -> np.ndarray:
    """Exact credit of one interior crossing; zero off the crossing features"""
    ctx.check_radix()
    return zeta_from_values(ctx, ctx.orthant_values())


def iota_from_values(ctx: CornerContext, values: Sequence[float], endpoint_value: float,
                     which: str) -> np.ndarray:
    """
    Credit of a path endpoint lying on hyperplanes.

    Mixed orthants enter with half weight. The departure orthant (start) or
    arrival orthant (end) enters through the jump between it and the value
    at the endpoint itself, split equally over the incident axes.
    """
    if which not in ('start', 'end'):
        raise ValueError(f"which must be 'start' or 'end', got {which!r}")
    k = ctx.radix
    if k == 0:
        return zero_credit(ctx.graph.n_features)
    full = (1 << k) - 1
    half = Fraction(1, 2)
    credit = [Fraction(0)] * k
    for mask, value in enumerate(values):
        if mask in (0, full):
            continue
        v = Fraction(float(value))
        row = _mask_weights(k, mask)
        for axis in range(k):
            credit[axis] += half * row[axis] * v
    f_x = Fraction(float(endpoint_value))
    if which == 'start':
        jump = Fraction(float(values[0])) - f_x
    else:
        jump = f_x - Fraction(float(values[full]))
    share = jump / k
    credit = [c + share for c in credit]
    return ctx.embed(credit)


def iota(ctx: CornerContext, which: str) -> np.ndarray:
    if ctx.radix == 0:
        return zero_credit(ctx.graph.n_features)
    ctx.check_radix()
    endpoint_value = ctx.graph.evaluate(ctx.point)
    return iota_from_values(ctx, ctx.orthant_values(), endpoint_value, which)


# -------------------------
# Shapley machinery
# -------------------------
@dataclass(frozen=True)
class LiftSpec:
    """Set function over players 0..n-1; `value` receives a bitmask and must give 0 for the empty set"""
    n_players: int
    value: Callable[[int], object]

    def table(self) -> List[object]:
        values = [self.value(mask) for mask in range(1 << self.n_players)]
        if values[0] != 0:
            raise ValueError(f"A lift must vanish on the empty coalition, got {values[0]!r}")
        return values


def shapley(lift: LiftSpec) -> List[object]:
    """
    Exact Shapley values by enumerating all 2^n coalitions.

    Stays in rational arithmetic when the lift returns ints or Fractions.
    """
    n = lift.n_players
    if n > MAX_SHAPLEY_PLAYERS:
        raise RadixOverflow(n, MAX_SHAPLEY_PLAYERS)
    if n < 1:
        raise ValueError("Shapley values need at least one player")
    values = lift.table()
    exact = all(isinstance(v, (int, Fraction)) for v in values)
    coef = [Fraction(factorial(s) * factorial(n - s - 1), factorial(n)) for s in range(n)]

    if exact:
        phi = [Fraction(0)] * n
        for mask, u in enumerate(values):
            if u == 0:
                continue
            size = bin(mask).count('1')
            for i in range(n):
                if mask >> i & 1:
                    phi[i] += coef[size - 1] * u
                else:
                    phi[i] -= coef[size] * u
        return phi

    u = np.asarray(values, dtype=float)
    masks = np.arange(1 << n)
    sizes = np.array([bin(m).count('1') for m in range(1 << n)])
    coef_f = np.array([float(c) for c in coef] + [0.0])
    phi_f = []
    for i in range(n):
        member = (masks >> i) & 1
        w = np.where(member == 1, coef_f[np.maximum(sizes - 1, 0)], -coef_f[np.minimum(sizes, n - 1)])
        w = np.where((member == 0) & (sizes == n), 0.0, w)
        phi_f.append(float(np.sum(w * u)))
    return phi_f


def empty_set_lift(f_x, n: int) -> LiftSpec:
    """nu(S) = f(x) only for the grand coalition"""
    full = (1 << n) - 1
    return LiftSpec(n, lambda mask: f_x if mask == full else 0 * f_x)


def grand_coalition_lift(f_x, n: int) -> LiftSpec:
    """nu(S) = f(x) for every non-empty S"""
    return LiftSpec(n, lambda mask: f_x if mask else 0 * f_x)


def half_weight_lift(f_x, n: int) -> LiftSpec:
    """nu(N) = f(x), nu(N minus player i) = f(x) - i (players numbered from 1), otherwise 0"""
    if n < 2:
        raise ValueError("The half-weight lift needs at least 2 players")
    full = (1 << n) - 1

    def value(mask: int):
        if mask == full:
            return f_x
        missing = full ^ mask
        if missing & (missing - 1) == 0:
            return f_x - missing.bit_length()
        return 0 * f_x

    return LiftSpec(n, value)


def half_weight_shapley(f_x, n: int, i: int) -> Fraction:
    """Closed-form Shapley value of player i (1-based) under half_weight_lift"""
    return Fraction(f_x) / n + Fraction(i, n) - (Fraction(n * (n + 1), 2) - i) / (n * (n - 1))


def additive_lift(weights: Sequence) -> LiftSpec:
    weights = list(weights)
    return LiftSpec(len(weights), lambda mask: sum(
        (w for i, w in enumerate(weights) if mask >> i & 1), 0 * weights[0] if weights else 0))


def corner_lift(ctx: CornerContext, values: Optional[Sequence[float]] = None) -> LiftSpec:
    """
    Perturbation lift at a corner: player i in S moves toward e along its
    feature, players outside S move toward s; normalized to vanish on the empty set.
    """
    k = ctx.radix
    values = ctx.orthant_values() if values is None else values
    full = (1 << k) - 1
    exact = [Fraction(float(v)) for v in values]
    base = exact[full]

    # coalition S (bit i set = toward e) is the orthant whose mismatch mask is the complement
    return LiftSpec(k, lambda mask: exact[full ^ mask] - base)


def shapley_lift_oracle(ctx: CornerContext, values: Optional[Sequence[float]] = None) -> np.ndarray:
    """Exact Shapley value of the corner lift, embedded in n dimensions; equals zeta"""
    if ctx.radix > MAX_SHAPLEY_PLAYERS:
        raise RadixOverflow(ctx.radix, MAX_SHAPLEY_PLAYERS)
    return ctx.embed(shapley(corner_lift(ctx, values)))


def to_float(credit: np.ndarray) -> np.ndarray:
    return np.array([float(c) for c in credit], dtype=float)
