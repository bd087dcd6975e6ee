"""Weight families over finite coordinate sets.

A family assigns a nonnegative weight gamma_u to every finite subset u of
the positive integers.  Bound to a kernel's constant C0, each set also
carries the transformed weight  gamma_hat_u = gamma_u * C0^|u|, which is
the squared norm of the integration representer's u-component.  The
machinery here enumerates the support in descending gamma_hat order,
measures the polynomial decay of that ordered sequence, and measures how
many support sets fit inside a coordinate box (the growth exponent t*).

Supported classes: product and finite-product weights from a generator
sequence, product-and-order-dependent (POD) weights, lexicographically
ordered weights of finite order, finite explicit maps, finite-intersection
families, and cut-off wrappers.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import zeta

from .errors import (
    ConfigError,
    EnumerationError,
    ParameterError,
    ShapeError,
    UnsupportedFamilyError,
)
from .sets import EMPTY_SET, VariableSet

INF = math.inf

Sigma = Union[int, float]  # a positive integer or math.inf


def _norm_sigma(sigma: Sigma) -> Sigma:
    if sigma == INF:
        return INF
    s = int(sigma)
    if s < 1:
        raise ParameterError(f"sigma must be >= 1 or inf, got {sigma}")
    return s


# ---------------------------------------------------------------------------
# Generator sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerGenerator:
    """gamma_j = c * j^(-beta); infinite positive support."""

    c: float
    beta: float

    def __post_init__(self) -> None:
        if self.c <= 0 or self.beta <= 0:
            raise ConfigError("power generator needs c > 0 and beta > 0")

    def value(self, j: int) -> float:
        return self.c * float(j) ** (-self.beta)

    def prefix(self, n: int) -> np.ndarray:
        return self.c * np.arange(1, n + 1, dtype=float) ** (-self.beta)

    def tail_sum(self, J: int) -> float:
        """Certified upper bound on sum_{j > J} gamma_j (integral test)."""
        if self.beta <= 1:
            return INF
        return self.c * float(J) ** (1.0 - self.beta) / (self.beta - 1.0)

    def power_sum(self, k: int, scale: float = 1.0) -> float:
        """sum_j (scale * gamma_j)^k = (scale*c)^k * zeta(k*beta), exact."""
        s = k * self.beta
        if s <= 1:
            return INF
        return (scale * self.c) ** k * float(zeta(s))

    @property
    def summable(self) -> bool:
        return self.beta > 1

    @property
    def finite(self) -> bool:
        return False


@dataclass(frozen=True)
class SequenceGenerator:
    """An explicit finite non-increasing sequence; zero beyond its length."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        v = self.values
        if any(x < 0 for x in v):
            raise ConfigError("generator values must be nonnegative")
        if any(v[i] < v[i + 1] for i in range(len(v) - 1)):
            raise ConfigError("generator values must be non-increasing")

    def value(self, j: int) -> float:
        return self.values[j - 1] if j <= len(self.values) else 0.0

    def prefix(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        k = min(n, len(self.values))
        out[:k] = self.values[:k]
        return out

    def tail_sum(self, J: int) -> float:
        return float(sum(self.values[J:]))

    def power_sum(self, k: int, scale: float = 1.0) -> float:
        return float(sum((scale * x) ** k for x in self.values))

    @property
    def summable(self) -> bool:
        return True

    @property
    def finite(self) -> bool:
        return True


Generator = Union[PowerGenerator, SequenceGenerator]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportEntry:
    rank: int
    u: VariableSet
    gamma: float
    gamma_hat: float


@dataclass(frozen=True)
class OrderedSupport:
    sigma: Sigma
    entries: tuple[SupportEntry, ...]


@dataclass(frozen=True)
class DecayReport:
    sigma: Sigma
    closed_form: Optional[float]
    estimate: float
    window: tuple[int, int]
    residual: float
    stderr: float
    saturating: bool = False


@dataclass(frozen=True)
class TstarReport:
    closed_form: Optional[float]
    estimate: Optional[float]
    saturating: bool = False


@dataclass(frozen=True)
class MassReport:
    """Sums of gamma_hat over the support (operator-norm mass).

    ``full`` includes the empty set, ``nonempty`` does not; both are lower
    estimates whose error is at most ``tail_bound``.
    """

    full: float
    nonempty: float
    tail_bound: float


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


class WeightFamily:
    """Base class; concrete families are frozen dataclasses below."""

    c0: Optional[float]

    # -- weights ----------------------------------------------------------
    def weight_of(self, u: VariableSet) -> float:
        raise NotImplementedError

    def hatweight_of(self, u: VariableSet) -> float:
        c0 = self.require_c0()
        if len(u) == 0:
            return self.weight_of(EMPTY_SET)
        return self.weight_of(u) * c0 ** len(u)

    def require_c0(self) -> float:
        if self.c0 is None:
            raise ConfigError(
                "weight family is not bound to a kernel constant C0; "
                "use bind(family, kernel)"
            )
        return self.c0

    def summable(self) -> bool:
        raise NotImplementedError

    # -- structure hooks ---------------------------------------------------
    @property
    def max_order(self) -> Sigma:
        """Largest cardinality with a not-identically-zero weight."""
        raise NotImplementedError

    def restricted_sum(self, factors: Mapping[int, float]) -> float:
        """sum over u contained in the key set of gamma_u * prod factors[j].

        Includes the empty-set term.  This is exactly the superposition
        kernel at a pair of points with the given per-coordinate kernel
        values, and with factors = C0 it is the hat-mass of all subsets.
        """
        raise NotImplementedError

    def count_box(self, m: int, sigma: Sigma) -> int:
        """|{positive-weight u : u subseteq [m], |u| <= sigma}|."""
        raise NotImplementedError

    def _decay_closed(self, sigma: Sigma) -> Optional[float]:
        return None

    def _tstar_closed(self, sigma: Sigma) -> Optional[float]:
        return None

    def _saturating(self) -> bool:
        """True when the positive support is a finite family of sets."""
        return False

    def with_c0(self, c0: float) -> "WeightFamily":
        return replace(self, c0=float(c0))

    # -- enumeration hooks (exactly one is implemented per class) ----------
    def _finite_entries(self) -> Optional[list[tuple[VariableSet, float]]]:
        return None

    def _frontier(self, sigma: Sigma) -> Optional["_Frontier"]:
        return None

    def _iter_native(self, sigma: Sigma) -> Optional[Iterator[tuple[VariableSet, float]]]:
        return None

    # -- mass --------------------------------------------------------------
    def _nonempty_mass(self, tail_tol: float) -> tuple[float, float]:
        """(lower estimate of sum_{u != empty} gamma_hat_u, tail bound)."""
        raise NotImplementedError


@dataclass(frozen=True)
class _Frontier:
    """Parameters of the best-first search over a product-type lattice."""

    q: Callable[[int], float]  # gamma_j * C0, non-increasing
    size_weight: Callable[[int], float]  # multiplier per cardinality
    max_size: Sigma  # largest cardinality with positive size weight
    flat: bool  # size_weight identically 1 up to max_size


def _product_type_restricted_sum(
    factors: Mapping[int, float],
    gamma_of: Callable[[int], float],
    size_weight: Callable[[int], float],
    max_size: Sigma,
) -> float:
    """sum_l sw(l) * e_l({gamma_j * f_j}) via the Newton-Girard recurrence."""
    vals = [gamma_of(j) * f for j, f in factors.items()]
    L = len(vals) if max_size == INF else min(len(vals), int(max_size))
    e = np.zeros(L + 1)
    e[0] = 1.0
    for v in vals:
        # numpy evaluates the RHS before assigning, so e on the right is
        # still the previous prefix's elementary symmetric sums
        e[1 : L + 1] = e[1 : L + 1] + v * e[0:L]
    return float(sum(size_weight(l) * e[l] for l in range(L + 1)))


@dataclass(frozen=True)
class ProductWeights(WeightFamily):
    """gamma_u = prod_{j in u} gamma_j, optionally zero above a finite order."""

    generator: Generator
    order: Optional[int] = None  # None: product weights; int: finite-product
    c0: Optional[float] = None

    def __post_init__(self) -> None:
        if self.order is not None and self.order < 1:
            raise ConfigError("finite-product order must be >= 1")

    def weight_of(self, u: VariableSet) -> float:
        if self.order is not None and len(u) > self.order:
            return 0.0
        out = 1.0
        for j in u:
            out *= self.generator.value(j)
        return out

    def hatweight_of(self, u: VariableSet) -> float:
        c0 = self.require_c0()
        if self.order is not None and len(u) > self.order:
            return 0.0
        out = 1.0
        for j in u:
            out *= self.generator.value(j) * c0
        return out

    def summable(self) -> bool:
        return self.generator.summable

    @property
    def max_order(self) -> Sigma:
        return INF if self.order is None else self.order

    def restricted_sum(self, factors: Mapping[int, float]) -> float:
        if self.order is None:
            out = 1.0
            for j, f in factors.items():
                out *= 1.0 + self.generator.value(j) * f
            return out
        return _product_type_restricted_sum(
            factors, self.generator.value, lambda l: 1.0, self.order
        )

    def count_box(self, m: int, sigma: Sigma) -> int:
        mpos = _positive_prefix_count(self.generator, m)
        smax = _min_sigma(sigma, self.max_order, mpos)
        return sum(math.comb(mpos, l) for l in range(1, smax + 1))

    def _decay_closed(self, sigma: Sigma) -> Optional[float]:
        if isinstance(self.generator, PowerGenerator):
            return self.generator.beta
        if self.generator.finite:
            return INF
        return None

    def _tstar_closed(self, sigma: Sigma) -> Optional[float]:
        if self.generator.finite:
            return 0.0
        cap = self.max_order
        return float(sigma if cap == INF else min(sigma, cap)) if sigma != INF else (
            INF if cap == INF else float(cap)
        )

    def _saturating(self) -> bool:
        return self.generator.finite

    def _frontier(self, sigma: Sigma) -> "_Frontier":
        c0 = self.require_c0()
        cap = _min_sigma(sigma, self.max_order)
        return _Frontier(
            q=lambda j: self.generator.value(j) * c0,
            size_weight=lambda l: 1.0 if l <= cap else 0.0,
            max_size=cap,
            flat=True,
        )

    def _nonempty_mass(self, tail_tol: float) -> tuple[float, float]:
        c0 = self.require_c0()
        if self.order is None:
            full, tail = _product_mass(self.generator, c0, tail_tol)
            return full - 1.0, tail
        return _esp_mass(
            self.generator, c0, lambda l: 1.0, self.order, tail_tol
        )


@dataclass(frozen=True)
class PODWeights(WeightFamily):
    """gamma_u = Gamma_{|u|} * prod_{j in u} gamma_j with Gamma_0 = Gamma_1 = 1.

    The order-weight sequence is stored explicitly up to its last entry;
    larger cardinalities carry weight zero, so the family has finite order.
    """

    generator: Generator
    order_weights: tuple[float, ...]
    c0: Optional[float] = None

    def __post_init__(self) -> None:
        g = self.order_weights
        if len(g) < 2 or g[0] != 1.0 or g[1] != 1.0:
            raise ConfigError("POD order weights must start with Gamma_0 = Gamma_1 = 1")
        if any(x < 0 for x in g):
            raise ConfigError("POD order weights must be nonnegative")

    def _gamma_order(self, l: int) -> float:
        return self.order_weights[l] if l < len(self.order_weights) else 0.0

    def weight_of(self, u: VariableSet) -> float:
        gl = self._gamma_order(len(u))
        if gl == 0.0:
            return 0.0
        out = gl
        for j in u:
            out *= self.generator.value(j)
        return out

    def summable(self) -> bool:
        return self.generator.summable

    @property
    def max_order(self) -> Sigma:
        return max(
            (l for l, g in enumerate(self.order_weights) if g > 0), default=0
        )

    def restricted_sum(self, factors: Mapping[int, float]) -> float:
        return _product_type_restricted_sum(
            factors, self.generator.value, self._gamma_order, self.max_order
        )

    def count_box(self, m: int, sigma: Sigma) -> int:
        mpos = _positive_prefix_count(self.generator, m)
        smax = _min_sigma(sigma, self.max_order, mpos)
        return sum(
            math.comb(mpos, l)
            for l in range(1, smax + 1)
            if self._gamma_order(l) > 0
        )

    def _decay_closed(self, sigma: Sigma) -> Optional[float]:
        if isinstance(self.generator, PowerGenerator):
            return self.generator.beta
        if self.generator.finite:
            return INF
        return None

    def _saturating(self) -> bool:
        return self.generator.finite

    def _frontier(self, sigma: Sigma) -> "_Frontier":
        c0 = self.require_c0()
        cap = _min_sigma(sigma, self.max_order)
        return _Frontier(
            q=lambda j: self.generator.value(j) * c0,
            size_weight=lambda l: self._gamma_order(l) if l <= cap else 0.0,
            max_size=cap,
            flat=False,
        )

    def _nonempty_mass(self, tail_tol: float) -> tuple[float, float]:
        c0 = self.require_c0()
        return _esp_mass(
            self.generator, c0, self._gamma_order, self.max_order, tail_tol
        )


@dataclass(frozen=True)
class ExplicitWeights(WeightFamily):
    """A finite map u -> gamma_u (the empty set may carry a weight too)."""

    entries: tuple[tuple[VariableSet, float], ...]
    c0: Optional[float] = None

    def __post_init__(self) -> None:
        seen = set()
        for u, g in self.entries:
            if g < 0:
                raise ConfigError(f"negative weight on {u}")
            if u in seen:
                raise ConfigError(f"duplicate entry for {u}")
            seen.add(u)

    @classmethod
    def of(cls, mapping: Mapping, c0: Optional[float] = None) -> "ExplicitWeights":
        entries = []
        for key, g in mapping.items():
            u = key if isinstance(key, VariableSet) else VariableSet.of(key)
            entries.append((u, float(g)))
        entries.sort(key=lambda e: (len(e[0]), e[0].indices))
        return cls(tuple(entries), c0=c0)

    def weight_of(self, u: VariableSet) -> float:
        for v, g in self.entries:
            if v == u:
                return g
        return 0.0

    def summable(self) -> bool:
        return True

    @property
    def max_order(self) -> Sigma:
        return max((len(u) for u, g in self.entries if g > 0), default=0)

    def restricted_sum(self, factors: Mapping[int, float]) -> float:
        keys = set(factors)
        total = 0.0
        for u, g in self.entries:
            if g == 0.0 or not set(u.indices) <= keys:
                continue
            v = g
            for j in u:
                v *= factors[j]
            total += v
        return total

    def count_box(self, m: int, sigma: Sigma) -> int:
        return sum(
            1
            for u, g in self.entries
            if g > 0 and 0 < len(u) <= sigma and (not u.indices or u.indices[-1] <= m)
        )

    def _decay_closed(self, sigma: Sigma) -> Optional[float]:
        return INF

    def _tstar_closed(self, sigma: Sigma) -> Optional[float]:
        return 0.0

    def _saturating(self) -> bool:
        return True

    def _finite_entries(self) -> list[tuple[VariableSet, float]]:
        return [(u, g) for u, g in self.entries if g > 0 and len(u) > 0]

    def _nonempty_mass(self, tail_tol: float) -> tuple[float, float]:
        c0 = self.require_c0()
        total = sum(
            g * c0 ** len(u) for u, g in self.entries if len(u) > 0 and g > 0
        )
        return float(total), 0.0


@dataclass(frozen=True)
class FiniteIntersectionWeights(ExplicitWeights):
    """An explicit family in which every positive set meets at most
    1 + degree positive sets (itself included)."""

    degree: int = 0

    def __post_init__(self) -> None:
        super().__post_init__()
        positive = [u for u, g in self.entries if g > 0 and len(u) > 0]
        for u in positive:
            hits = sum(
                1 for v in positive if set(u.indices) & set(v.indices)
            )
            if hits > 1 + self.degree:
                raise ConfigError(
                    f"{u} intersects {hits} positive sets, exceeding "
                    f"intersection degree {self.degree}"
                )

    @classmethod
    def of(
        cls, mapping: Mapping, degree: int, c0: Optional[float] = None
    ) -> "FiniteIntersectionWeights":
        base = ExplicitWeights.of(mapping)
        return cls(base.entries, c0=c0, degree=degree)

    def _decay_closed(self, sigma: Sigma) -> Optional[float]:
        return INF

    def _tstar_closed(self, sigma: Sigma) -> Optional[float]:
        # The defining intersection property pins the box-growth exponent
        # to 1 whenever the family is extended indefinitely.
        return 1.0


@dataclass(frozen=True)
class LexOrderedWeights(WeightFamily):
    """Positive weights on every set of cardinality <= order, chosen so the
    descending hat-weight enumeration follows the lexicographic order of
    the words spelled by each set's elements in decreasing order.

    The generator supplies the hat-weight value at each lexicographic
    rank; the raw weight of a set is that value divided by C0^|u|.
    """

    order: int
    generator: PowerGenerator
    c0: Optional[float] = None

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ConfigError("lexicographic order must be >= 1")
        if not isinstance(self.generator, PowerGenerator):
            raise ConfigError(
                "lexicographically-ordered weights need an infinite positive "
                "generator (power kind)"
            )

    def lex_rank(self, u: VariableSet) -> int:
        if len(u) == 0:
            raise ParameterError("the empty set has no lexicographic rank")
        if len(u) > self.order:
            raise ParameterError(f"{u} exceeds order {self.order}")
        return _lex_rank(u.indices, self.order)

    def weight_of(self, u: VariableSet) -> float:
        if len(u) == 0:
            return 1.0
        if len(u) > self.order:
            return 0.0
        c0 = self.require_c0()
        return self.generator.value(self.lex_rank(u)) / c0 ** len(u)

    def hatweight_of(self, u: VariableSet) -> float:
        self.require_c0()
        if len(u) == 0:
            return 1.0
        if len(u) > self.order:
            return 0.0
        return self.generator.value(self.lex_rank(u))

    def summable(self) -> bool:
        return self.generator.summable

    @property
    def max_order(self) -> Sigma:
        return self.order

    def restricted_sum(self, factors: Mapping[int, float]) -> float:
        from itertools import combinations

        keys = sorted(factors)
        smax = min(self.order, len(keys))
        n_sets = sum(math.comb(len(keys), l) for l in range(1, smax + 1))
        if n_sets > 2**20:
            raise UnsupportedFamilyError(
                "restricted sum over lexicographically-ordered weights is "
                f"limited to 2^20 subsets, needed {n_sets}"
            )
        c0 = self.require_c0()
        total = 1.0
        for l in range(1, smax + 1):
            for combo in combinations(keys, l):
                u = VariableSet(tuple(combo))
                v = self.generator.value(self.lex_rank(u)) / c0**l
                for j in combo:
                    v *= factors[j]
                total += v
        return total

    def count_box(self, m: int, sigma: Sigma) -> int:
        smax = _min_sigma(sigma, self.order, m)
        return sum(math.comb(m, l) for l in range(1, smax + 1))

    def _tstar_closed(self, sigma: Sigma) -> Optional[float]:
        return float(min(sigma, self.order)) if sigma != INF else float(self.order)

    def _iter_native(self, sigma: Sigma) -> Iterator[tuple[VariableSet, float]]:
        self.require_c0()
        cap = _min_sigma(sigma, self.order)

        def gen() -> Iterator[tuple[VariableSet, float]]:
            rank = 0
            for idx in _lex_sets(self.order):
                rank += 1
                if len(idx) <= cap:
                    yield VariableSet(idx), self.generator.value(rank)

        return gen()

    def _nonempty_mass(self, tail_tol: float) -> tuple[float, float]:
        self.require_c0()
        g = self.generator
        return g.power_sum(1), 0.0


@dataclass(frozen=True)
class CutoffWeights(WeightFamily):
    """The base family with every weight of cardinality > sigma zeroed."""

    base: WeightFamily
    sigma: int
    c0: Optional[float] = None

    def __post_init__(self) -> None:
        if self.sigma < 1:
            raise ConfigError("cut-off order must be >= 1")
        if self.c0 is None and self.base.c0 is not None:
            object.__setattr__(self, "c0", self.base.c0)

    def with_c0(self, c0: float) -> "CutoffWeights":
        return CutoffWeights(self.base.with_c0(c0), self.sigma, c0=float(c0))

    def weight_of(self, u: VariableSet) -> float:
        if len(u) > self.sigma:
            return 0.0
        return self.base.weight_of(u)

    def hatweight_of(self, u: VariableSet) -> float:
        if len(u) > self.sigma:
            return 0.0
        return self.base.hatweight_of(u)

    def summable(self) -> bool:
        return self.base.summable()

    @property
    def max_order(self) -> Sigma:
        return _min_sigma(self.sigma, self.base.max_order)

    def restricted_sum(self, factors: Mapping[int, float]) -> float:
        if len(factors) <= self.sigma:
            return self.base.restricted_sum(factors)
        if isinstance(self.base, ProductWeights):
            return _product_type_restricted_sum(
                factors,
                self.base.generator.value,
                lambda l: 1.0,
                self.max_order,
            )
        if isinstance(self.base, PODWeights):
            return _product_type_restricted_sum(
                factors,
                self.base.generator.value,
                self.base._gamma_order,
                self.max_order,
            )
        if isinstance(self.base, ExplicitWeights):
            trimmed = ExplicitWeights(
                tuple(e for e in self.base.entries if len(e[0]) <= self.sigma),
                c0=self.c0,
            )
            return trimmed.restricted_sum(factors)
        if isinstance(self.base, LexOrderedWeights):
            capped = replace(self.base, order=min(self.base.order, self.sigma))
            return capped.restricted_sum(factors)
        raise UnsupportedFamilyError(f"cannot restrict {type(self.base).__name__}")

    def count_box(self, m: int, sigma: Sigma) -> int:
        return self.base.count_box(m, _min_sigma(sigma, self.sigma))

    def _decay_closed(self, sigma: Sigma) -> Optional[float]:
        return self.base._decay_closed(_min_sigma(sigma, self.sigma))

    def _tstar_closed(self, sigma: Sigma) -> Optional[float]:
        return self.base._tstar_closed(_min_sigma(sigma, self.sigma))

    def _saturating(self) -> bool:
        return self.base._saturating()

    def _finite_entries(self) -> Optional[list[tuple[VariableSet, float]]]:
        inner = self.base._finite_entries()
        if inner is None:
            return None
        return [(u, g) for u, g in inner if len(u) <= self.sigma]

    def _frontier(self, sigma: Sigma) -> Optional[_Frontier]:
        return self.base._frontier(_min_sigma(sigma, self.sigma))

    def _iter_native(self, sigma: Sigma) -> Optional[Iterator[tuple[VariableSet, float]]]:
        return self.base._iter_native(_min_sigma(sigma, self.sigma))

    def _nonempty_mass(self, tail_tol: float) -> tuple[float, float]:
        base = self.base
        if isinstance(base, ProductWeights):
            cap = self.max_order
            if cap == INF:
                return base._nonempty_mass(tail_tol)
            return _esp_mass(
                base.generator, self.require_c0(), lambda l: 1.0, cap, tail_tol
            )
        if isinstance(base, PODWeights):
            return _esp_mass(
                base.generator,
                self.require_c0(),
                lambda l: base._gamma_order(l) if l <= self.sigma else 0.0,
                self.max_order,
                tail_tol,
            )
        if isinstance(base, ExplicitWeights):
            c0 = self.require_c0()
            total = sum(
                g * c0 ** len(u)
                for u, g in base.entries
                if 0 < len(u) <= self.sigma and g > 0
            )
            return float(total), 0.0
        if isinstance(base, LexOrderedWeights):
            # Partial sum over the size-restricted stream; the remainder is
            # bounded by the generator tail beyond the last full-stream rank.
            gen = base.generator
            total = 0.0
            full_rank = 0
            for idx in _lex_sets(base.order):
                full_rank += 1
                if len(idx) <= self.sigma:
                    total += gen.value(full_rank)
                if gen.tail_sum(full_rank) <= tail_tol:
                    return total, gen.tail_sum(full_rank)
                if full_rank > 10_000_000:
                    raise EnumerationError(
                        "cut-off mass enumeration exceeded the candidate cap"
                    )
        raise UnsupportedFamilyError(
            f"no mass rule for cut-off of {type(base).__name__}"
        )


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _min_sigma(*vals: Sigma) -> Sigma:
    out: Sigma = INF
    for v in vals:
        if v != INF:
            out = v if out == INF else min(out, v)
    return out


def _positive_prefix_count(gen: Generator, m: int) -> int:
    if not gen.finite:
        return m
    values = gen.prefix(m)
    return int(np.count_nonzero(values > 0))


def _lex_words(max_el: int, max_size: int) -> Iterator[tuple[int, ...]]:
    """Nonempty subsets of [max_el] with size <= max_size, in the order of
    the words spelled by decreasing elements."""
    for m in range(1, max_el + 1):
        yield (m,)
        if max_size >= 2:
            for rest in _lex_words(m - 1, max_size - 1):
                yield rest + (m,)


def _lex_sets(order: int) -> Iterator[tuple[int, ...]]:
    m = 1
    while True:
        yield (m,)
        if order >= 2:
            for rest in _lex_words(m - 1, order - 1):
                yield rest + (m,)
        m += 1


def _count_nonempty(m: int, smax: int) -> int:
    smax = min(smax, m)
    return sum(math.comb(m, l) for l in range(1, smax + 1))


def _lex_rank(indices: tuple[int, ...], order: int) -> int:
    """1-based position of the set in the lexicographic stream of order."""
    top = indices[-1]
    rank = sum(1 + _count_nonempty(m - 1, order - 1) for m in range(1, top))
    rank += 1
    rest = indices[:-1]
    if rest:
        rank += _lex_rank(rest, order - 1)
    return rank


def _product_mass(gen: Generator, c0: float, tail_tol: float) -> tuple[float, float]:
    """prod_j (1 + gamma_j * C0) for unrestricted product weights.

    Power generators use the exact log-series over zeta power sums; finite
    generators multiply directly.  Returns (value, tail bound).
    """
    if gen.finite:
        q = gen.prefix(len(gen.values)) * c0
        return float(np.prod(1.0 + q)), 0.0
    # Split off leading factors with q_j >= 1/2 so the log series converges
    # geometrically on the rest.
    j0 = 1
    lead = 1.0
    while gen.value(j0) * c0 >= 0.5:
        lead *= 1.0 + gen.value(j0) * c0
        j0 += 1
        if j0 > 10_000:
            raise EnumerationError("generator does not decay below 1/2")
    head = gen.prefix(j0 - 1) * c0
    # log prod_{j >= j0} (1+q_j) = sum_k (-1)^{k+1}/k * sum_{j>=j0} q_j^k
    total = 0.0
    k = 1
    qmax = gen.value(j0) * c0
    while True:
        pk = gen.power_sum(k, c0) - float(np.sum(head**k))
        term = ((-1.0) ** (k + 1)) * pk / k
        total += term
        # remaining terms are bounded by a geometric series with ratio qmax
        rem = pk * qmax / (k + 1) / max(1e-300, 1.0 - qmax)
        if rem < tail_tol * 1e-3 or k > 200:
            break
        k += 1
    value = lead * math.exp(total)
    return value, value * max(rem, 0.0)


def _esp_mass(
    gen: Generator,
    c0: float,
    size_weight: Callable[[int], float],
    max_size: Sigma,
    tail_tol: float,
) -> tuple[float, float]:
    """sum_{l>=1} sw(l) * e_l(q) for q_j = gamma_j * C0, finite max order.

    Elementary symmetric sums over the full (possibly infinite) sequence
    come from power sums via the Newton-Girard recurrence; for power
    generators the power sums are exact zeta values.
    """
    L = int(max_size)
    if gen.finite:
        p = [float(np.sum((gen.prefix(len(gen.values)) * c0) ** k)) for k in range(1, L + 1)]
        rem = 0.0
    else:
        p = [gen.power_sum(k, c0) for k in range(1, L + 1)]
        rem = 0.0
    e = [1.0] + [0.0] * L
    for l in range(1, L + 1):
        acc = 0.0
        for k in range(1, l + 1):
            acc += ((-1.0) ** (k - 1)) * e[l - k] * p[k - 1]
        e[l] = acc / l
    total = sum(size_weight(l) * e[l] for l in range(1, L + 1))
    return float(total), rem


# ---------------------------------------------------------------------------
# Ordered enumeration
# ---------------------------------------------------------------------------

ENUMERATION_CAP = 10_000_000


def iter_ordered(
    W: WeightFamily, sigma: Sigma = INF, cap: int = ENUMERATION_CAP
) -> Iterator[SupportEntry]:
    """Yield the nonempty positive-weight sets with |u| <= sigma in
    descending hat-weight order (ties: smaller cardinality, then
    lexicographic on the index tuple)."""
    sigma = _norm_sigma(sigma)
    W.require_c0()

    entries = W._finite_entries()
    if entries is not None:
        ranked = [
            (W.hatweight_of(u), u, g)
            for u, g in entries
            if len(u) <= sigma and g > 0
        ]
        ranked.sort(key=lambda e: (-e[0], len(e[1]), e[1].indices))
        for rank, (gh, u, g) in enumerate(ranked, start=1):
            yield SupportEntry(rank, u, g, gh)
        return

    native = W._iter_native(sigma)
    if native is not None:
        rank = 0
        for count, (u, gh) in enumerate(native):
            if count >= cap:
                raise EnumerationError("native enumeration exceeded the cap")
            rank += 1
            yield SupportEntry(rank, u, W.weight_of(u), gh)
        return

    frontier = W._frontier(sigma)
    if frontier is None:
        raise UnsupportedFamilyError(
            f"{type(W).__name__} does not support ordered enumeration"
        )
    yield from _iter_frontier(W, frontier, cap)


def _subtree_bound(fr: _Frontier, prefix_prod: float, size: int, m: int) -> float:
    """Upper bound on the hat weight of a set and all its descendants.

    Descendants share the prefix below the maximal element m and append
    indices >= m, so their weight is at most prefix * best extension.
    """
    p = size - 1
    q = fr.q
    qm = q(m)
    if qm <= 0.0 or prefix_prod <= 0.0:
        return 0.0
    if fr.flat:
        if p + 1 > fr.max_size:
            return 0.0
        best = qm
        run = qm
        lp = 2
        while p + lp <= fr.max_size:
            nxt = q(m + lp - 1)
            if nxt <= 1.0:
                break
            run *= nxt
            best = max(best, run)
            lp += 1
        return prefix_prod * best
    best = 0.0
    run = 1.0
    lp = 1
    while p + lp <= fr.max_size:
        run *= q(m + lp - 1)
        if run <= 0.0:
            break
        best = max(best, fr.size_weight(p + lp) * run)
        lp += 1
    return prefix_prod * best


def _iter_frontier(
    W: WeightFamily, fr: _Frontier, cap: int
) -> Iterator[SupportEntry]:
    if fr.max_size == 0 or fr.q(1) <= 0.0:
        return
    # frontier heap: (-subtree bound, cardinality, indices, prefix product)
    root = (1,)
    heap = [(-_subtree_bound(fr, 1.0, 1, 1), 1, root, 1.0)]
    buffer: list[tuple[float, int, tuple[int, ...]]] = []
    pops = 0
    rank = 0
    while heap or buffer:
        while buffer and (
            not heap or -buffer[0][0] > -heap[0][0] + 0.0
        ):
            gh, _, idx = heapq.heappop(buffer)
            rank += 1
            u = VariableSet(idx)
            yield SupportEntry(rank, u, W.weight_of(u), -gh)
        if not heap:
            break
        negP, card, idx, prefix_prod = heapq.heappop(heap)
        pops += 1
        if pops > cap:
            raise EnumerationError(
                f"support enumeration exceeded the candidate cap ({cap} pops); "
                "the generator may not decay"
            )
        m = idx[-1]
        qm = fr.q(m)
        own = prefix_prod * qm
        gh = fr.size_weight(card) * own
        if gh > 0.0:
            heapq.heappush(buffer, (-gh, card, idx))
        # child 1: bump the maximal index
        bumped = idx[:-1] + (m + 1,)
        pb = _subtree_bound(fr, prefix_prod, card, m + 1)
        if pb > 0.0:
            heapq.heappush(heap, (-pb, card, bumped, prefix_prod))
        # child 2: append the next index
        if card + 1 <= fr.max_size:
            appended = idx + (m + 1,)
            pa = _subtree_bound(fr, own, card + 1, m + 1)
            if pa > 0.0:
                heapq.heappush(heap, (-pa, card + 1, appended, own))


def enumerate_ordered(
    W: WeightFamily, sigma: Sigma, m: int, cap: int = ENUMERATION_CAP
) -> OrderedSupport:
    """The m largest-hat-weight nonempty sets with |u| <= sigma."""
    if m < 1:
        raise ParameterError("need m >= 1")
    out = []
    for entry in iter_ordered(W, sigma, cap):
        out.append(entry)
        if len(out) == m:
            break
    return OrderedSupport(sigma=_norm_sigma(sigma), entries=tuple(out))


def cutoff(W: WeightFamily, sigma: int) -> WeightFamily:
    """Zero all weights of cardinality above sigma (idempotent)."""
    sigma = int(sigma)
    if sigma < 1:
        raise ParameterError("cut-off order must be >= 1")
    if isinstance(W, CutoffWeights):
        eff = min(W.sigma, sigma)
        return CutoffWeights(W.base, eff, c0=W.c0)
    return CutoffWeights(W, sigma, c0=W.c0)


# ---------------------------------------------------------------------------
# Decay and box-growth exponents
# ---------------------------------------------------------------------------


def decay(W: WeightFamily, sigma: Sigma, ranks: int = 256) -> DecayReport:
    """Polynomial decay exponent of the ordered hat-weight sequence.

    The estimate regresses -log gamma_hat on log rank over the tail half
    of the requested ranks; classes with a power-law generator also carry
    the closed form, which is the same for every cut-off order.
    """
    if ranks < 16:
        raise ParameterError("decay estimation needs ranks >= 16")
    sigma = _norm_sigma(sigma)
    closed = W._decay_closed(sigma)

    seq = []
    for entry in iter_ordered(W, sigma):
        seq.append(entry.gamma_hat)
        if len(seq) == ranks:
            break
    if len(seq) < ranks:
        return DecayReport(
            sigma=sigma,
            closed_form=closed if closed is not None else INF,
            estimate=INF,
            window=(len(seq), len(seq)),
            residual=0.0,
            stderr=0.0,
            saturating=True,
        )
    lo = ranks // 2
    js = np.arange(lo + 1, ranks + 1, dtype=float)
    ys = -np.log(np.asarray(seq[lo:ranks]))
    A = np.vstack([np.log(js), np.ones_like(js)]).T
    coef, res, *_ = np.linalg.lstsq(A, ys, rcond=None)
    slope = float(coef[0])
    fitted = A @ coef
    resid = float(np.sqrt(np.mean((ys - fitted) ** 2)))
    dof = max(len(js) - 2, 1)
    sxx = float(np.sum((A[:, 0] - A[:, 0].mean()) ** 2))
    stderr = float(np.sqrt(max(np.sum((ys - fitted) ** 2) / dof, 0.0) / max(sxx, 1e-300)))
    return DecayReport(
        sigma=sigma,
        closed_form=closed,
        estimate=slope,
        window=(lo + 1, ranks),
        residual=resid,
        stderr=stderr,
        saturating=False,
    )


_TSTAR_BOXES = (4, 8, 16, 32, 64)


def tstar(W: WeightFamily, sigma: Sigma) -> TstarReport:
    """Growth exponent of the number of support sets inside a box [m].

    Closed forms per class; the estimate fits log count against log m over
    the larger boxes.
    """
    sigma = _norm_sigma(sigma)
    closed = W._tstar_closed(sigma)
    counts = np.array(
        [W.count_box(m, sigma) for m in _TSTAR_BOXES], dtype=float
    )
    if np.all(counts <= 0):
        return TstarReport(closed_form=closed, estimate=None, saturating=True)
    tail = len(_TSTAR_BOXES) - len(_TSTAR_BOXES) // 2
    ms = np.array(_TSTAR_BOXES[-tail:], dtype=float)
    cs = np.maximum(counts[-tail:], 1.0)
    A = np.vstack([np.log(ms), np.ones_like(ms)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(cs), rcond=None)
    return TstarReport(
        closed_form=closed,
        estimate=float(coef[0]),
        saturating=W._saturating(),
    )


def operator_norm_sq(W: WeightFamily, tail_tol: float = 1e-10) -> MassReport:
    """The squared operator norm of integration: sum_u gamma_hat_u.

    Also reports the nonempty-set share, which is the total projection
    mass entering the uncovered-mass calculus.
    """
    if not W.summable():
        raise UnsupportedFamilyError(
            "weight family fails the summability certificate"
        )
    nonempty, tail = W._nonempty_mass(tail_tol)
    empty = W.weight_of(EMPTY_SET)
    return MassReport(full=empty + nonempty, nonempty=nonempty, tail_bound=tail)


# Thin functional aliases matching the operation surface.


def weight_of(W: WeightFamily, u: VariableSet) -> float:
    return W.weight_of(u)


def hatweight_of(W: WeightFamily, u: VariableSet) -> float:
    return W.hatweight_of(u)


def bind(W: WeightFamily, kernel_or_c0) -> WeightFamily:
    """Bind a family to a kernel's C0 (accepts a kernel or a float)."""
    c0 = getattr(kernel_or_c0, "C0", kernel_or_c0)
    return W.with_c0(float(c0))


# ---------------------------------------------------------------------------
# Parsing: spec strings and structured files
# ---------------------------------------------------------------------------


def _parse_generator(tokens: list[str]) -> tuple[Generator, list[str]]:
    if not tokens:
        raise ConfigError("missing generator specification")
    kind = tokens[0]
    if kind == "pow":
        if len(tokens) < 3:
            raise ConfigError("power generator needs c and beta: pow:C:BETA")
        return PowerGenerator(float(tokens[1]), float(tokens[2])), tokens[3:]
    if kind == "list":
        if len(tokens) < 2:
            raise ConfigError("list generator needs values: list:V1,V2,...")
        vals = tuple(float(x) for x in tokens[1].split(","))
        return SequenceGenerator(vals), tokens[2:]
    raise ConfigError(f"unknown generator kind {kind!r}")


def parse_weight_spec(spec: str, c0: Optional[float] = None) -> WeightFamily:
    """Parse a compact family spec such as ``prod:pow:1:3``.

    Forms: ``prod:<gen>``, ``fprod:OMEGA:<gen>``, ``pod:<gen>:G2,G3,...``,
    ``lex:OMEGA:<gen>``, ``cutoff:SIGMA:<spec>``, ``explicit:PATH``,
    ``fint:DEGREE:PATH`` with ``<gen>`` one of ``pow:C:BETA`` or
    ``list:V1,V2,...``.  A bare path to a YAML/JSON family file also works.
    """
    import os

    if os.path.exists(spec):
        return load_weight_file(spec, c0=c0)
    tokens = spec.split(":")
    head, rest = tokens[0], tokens[1:]
    if head == "prod":
        gen, rest = _parse_generator(rest)
        _expect_consumed(rest, spec)
        return ProductWeights(gen, c0=c0)
    if head == "fprod":
        if not rest:
            raise ConfigError("fprod needs an order: fprod:OMEGA:<gen>")
        omega = int(rest[0])
        gen, rest = _parse_generator(rest[1:])
        _expect_consumed(rest, spec)
        return ProductWeights(gen, order=omega, c0=c0)
    if head == "pod":
        gen, rest = _parse_generator(rest)
        if not rest:
            raise ConfigError("pod needs order weights: pod:<gen>:G2,G3,...")
        gammas = (1.0, 1.0) + tuple(float(x) for x in rest[0].split(","))
        _expect_consumed(rest[1:], spec)
        return PODWeights(gen, gammas, c0=c0)
    if head == "lex":
        if not rest:
            raise ConfigError("lex needs an order: lex:OMEGA:<gen>")
        omega = int(rest[0])
        gen, rest = _parse_generator(rest[1:])
        _expect_consumed(rest, spec)
        if not isinstance(gen, PowerGenerator):
            raise ConfigError("lex weights need a power generator")
        return LexOrderedWeights(omega, gen, c0=c0)
    if head == "cutoff":
        if len(rest) < 2:
            raise ConfigError("cutoff needs sigma and a base spec")
        sigma = int(rest[0])
        base = parse_weight_spec(":".join(rest[1:]), c0=c0)
        return cutoff(base, sigma)
    if head in ("explicit", "fint"):
        raise ConfigError(
            f"{head} families are file-based; pass the file path directly"
        )
    raise ConfigError(f"unknown weight family spec {spec!r}")


def _expect_consumed(rest: list[str], spec: str) -> None:
    if rest:
        raise ConfigError(f"trailing tokens {rest} in weight spec {spec!r}")


def weight_family_to_dict(W: WeightFamily) -> dict:
    if isinstance(W, CutoffWeights):
        return {
            "class": "cutoff",
            "sigma": W.sigma,
            "base": weight_family_to_dict(W.base),
        }
    if isinstance(W, ProductWeights):
        d = {"class": "product" if W.order is None else "finite_product"}
        if W.order is not None:
            d["order"] = W.order
        d["generator"] = _generator_to_dict(W.generator)
        return d
    if isinstance(W, PODWeights):
        return {
            "class": "pod",
            "generator": _generator_to_dict(W.generator),
            "order_weights": list(W.order_weights),
        }
    if isinstance(W, LexOrderedWeights):
        return {
            "class": "lex",
            "order": W.order,
            "generator": _generator_to_dict(W.generator),
        }
    if isinstance(W, FiniteIntersectionWeights):
        return {
            "class": "finite_intersection",
            "degree": W.degree,
            "entries": [
                {"u": list(u.indices), "gamma": g} for u, g in W.entries
            ],
        }
    if isinstance(W, ExplicitWeights):
        return {
            "class": "explicit",
            "entries": [
                {"u": list(u.indices), "gamma": g} for u, g in W.entries
            ],
        }
    raise ConfigError(f"cannot serialize {type(W).__name__}")


def _generator_to_dict(gen: Generator) -> dict:
    if isinstance(gen, PowerGenerator):
        return {"kind": "power", "c": gen.c, "beta": gen.beta}
    return {"kind": "list", "values": list(gen.values)}


def _generator_from_dict(d: Mapping) -> Generator:
    kind = d.get("kind")
    if kind == "power":
        return PowerGenerator(float(d["c"]), float(d["beta"]))
    if kind == "list":
        return SequenceGenerator(tuple(float(x) for x in d["values"]))
    raise ConfigError(f"unknown generator kind {kind!r}")


def weight_family_from_dict(d: Mapping, c0: Optional[float] = None) -> WeightFamily:
    cls = d.get("class")
    if cls == "product":
        return ProductWeights(_generator_from_dict(d["generator"]), c0=c0)
    if cls == "finite_product":
        return ProductWeights(
            _generator_from_dict(d["generator"]), order=int(d["order"]), c0=c0
        )
    if cls == "pod":
        return PODWeights(
            _generator_from_dict(d["generator"]),
            tuple(float(x) for x in d["order_weights"]),
            c0=c0,
        )
    if cls == "lex":
        gen = _generator_from_dict(d["generator"])
        if not isinstance(gen, PowerGenerator):
            raise ConfigError("lex weights need a power generator")
        return LexOrderedWeights(int(d["order"]), gen, c0=c0)
    if cls == "explicit":
        mapping = {tuple(e["u"]): float(e["gamma"]) for e in d["entries"]}
        return ExplicitWeights.of(mapping, c0=c0)
    if cls == "finite_intersection":
        mapping = {tuple(e["u"]): float(e["gamma"]) for e in d["entries"]}
        return FiniteIntersectionWeights.of(mapping, int(d["degree"]), c0=c0)
    if cls == "cutoff":
        base = weight_family_from_dict(d["base"], c0=c0)
        return cutoff(base, int(d["sigma"]))
    raise ConfigError(f"unknown weight family class {cls!r}")


def load_weight_file(path: str, c0: Optional[float] = None) -> WeightFamily:
    import json

    import yaml

    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = yaml.safe_load(text)
    if not isinstance(doc, Mapping):
        raise ConfigError(f"weight file {path} does not contain a mapping")
    return weight_family_from_dict(doc, c0=c0)
