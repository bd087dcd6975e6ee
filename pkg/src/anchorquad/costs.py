"""Sampling-cost models: dollar functions, nested chains, ledgers.

Every function evaluation is charged through a monotone dollar function
of the number of active variables.  Under nested sampling the charge is
the dollar value of the first chain member containing the point's active
set (infinity if none); under unrestricted sampling it is the dollar
value of the active set itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, ParameterError, ShapeError
from .sets import EMPTY_SET, VariableSet

INF = math.inf


# ---------------------------------------------------------------------------
# Dollar functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DollarFunction:
    kind: str  # "poly" | "exp" | "table"
    s: float = 1.0
    r: float = 0.0
    table: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("poly", "exp", "table"):
            raise ConfigError(f"unknown dollar kind {self.kind!r}")
        if self.kind == "poly" and self.s <= 0:
            raise ConfigError("poly dollar needs s > 0")
        if self.kind == "exp" and self.r < 0:
            raise ConfigError("exp dollar needs r >= 0")
        if self.kind == "table":
            t = self.table
            if not t or any(x < 1 for x in t):
                raise ConfigError("table dollar needs values >= 1")
            if any(t[i] > t[i + 1] for i in range(len(t) - 1)):
                raise ConfigError("table dollar must be non-decreasing")

    def __call__(self, nu: int) -> float:
        if nu < 0:
            raise ParameterError("active-variable count must be >= 0")
        if self.kind == "poly":
            # floor at 1 so that anchor-only evaluations still cost something
            return max(1.0, float(nu) ** self.s)
        if self.kind == "exp":
            return math.exp(self.r * nu)
        t = self.table
        return t[nu] if nu < len(t) else t[-1]


def poly_dollar(s: float = 1.0) -> DollarFunction:
    return DollarFunction(kind="poly", s=s)


def exp_dollar(r: float = 0.0) -> DollarFunction:
    return DollarFunction(kind="exp", r=r)


def table_dollar(values: Iterable[float]) -> DollarFunction:
    return DollarFunction(kind="table", table=tuple(float(v) for v in values))


def dollar(D: DollarFunction, nu: int) -> float:
    return D(nu)


# ---------------------------------------------------------------------------
# Nested chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NestedChain:
    """A strictly increasing chain of nonempty coordinate sets.

    Either an explicit prefix (beyond which containment fails and the
    charge is infinite) or the doubling rule v_i = [base * 2^(i-1)],
    which eventually contains every finite set.
    """

    prefix: tuple[VariableSet, ...] = ()
    base: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.prefix and self.base is None:
            raise ConfigError("chain needs an explicit prefix or a doubling base")
        if self.base is not None and self.base < 1:
            raise ConfigError("doubling base must be >= 1")
        for i, v in enumerate(self.prefix):
            if len(v) == 0:
                raise ConfigError("chain members must be nonempty")
            if i and not (
                self.prefix[i - 1].issubset(v) and len(self.prefix[i - 1]) < len(v)
            ):
                raise ConfigError(
                    f"chain must be strictly increasing: {self.prefix[i-1]} vs {v}"
                )

    def member(self, i: int) -> Optional[VariableSet]:
        """The i-th chain member (1-based), or None past an explicit prefix."""
        if i < 1:
            raise ParameterError("chain members are 1-based")
        if self.prefix and i <= len(self.prefix):
            return self.prefix[i - 1]
        if self.base is None:
            return None
        return VariableSet(tuple(range(1, self.base * 2 ** (i - 1) + 1)))

    def first_containing(self, active: VariableSet) -> Optional[tuple[int, VariableSet]]:
        for i, v in enumerate(self.prefix, start=1):
            if active.issubset(v):
                return i, v
        if self.base is None:
            return None
        top = active.indices[-1] if len(active) else 1
        i = 1
        while self.base * 2 ** (i - 1) < top:
            i += 1
        i = max(i, len(self.prefix) + 1)
        v = self.member(i)
        assert v is not None
        return i, v


def doubling_chain(base: int = 1) -> NestedChain:
    return NestedChain(base=base)


def explicit_chain(sets: Sequence[Iterable[int]]) -> NestedChain:
    return NestedChain(prefix=tuple(VariableSet.of(s) for s in sets))


def nested_cost(chain: NestedChain, D: DollarFunction, active: VariableSet) -> float:
    """Dollar value of the first chain member containing the active set."""
    hit = chain.first_containing(active)
    if hit is None:
        return INF
    return D(len(hit[1]))


def unrestricted_cost(D: DollarFunction, active: VariableSet) -> float:
    """The infimum over containing subspaces is attained at the set itself."""
    return D(len(active))


# ---------------------------------------------------------------------------
# Cost models and ledgers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnrestrictedModel:
    dollar: DollarFunction

    tag = "unrestricted"

    def cost(self, active: VariableSet) -> float:
        return unrestricted_cost(self.dollar, active)

    def cost_of_count(self, nu: int) -> Optional[float]:
        """Per-evaluation cost depends only on the active count here."""
        return self.dollar(nu)


@dataclass(frozen=True)
class NestedModel:
    chain: NestedChain
    dollar: DollarFunction

    tag = "nested"

    def cost(self, active: VariableSet) -> float:
        return nested_cost(self.chain, self.dollar, active)

    def cost_of_count(self, nu: int) -> Optional[float]:
        return None


CostModel = Union[UnrestrictedModel, NestedModel]


@dataclass(frozen=True)
class LedgerEntry:
    active: VariableSet
    charged: float
    count: int = 1


class CostLedger:
    """Accumulates per-evaluation charges; runs of identical evaluations
    are stored compressed as (active set, charge, count).

    ``anchor`` is the kernel's anchor value, used to strip coordinates
    that happen to sit exactly at the anchor when determining a point's
    true minimal active set (NaN disables the check: stored coordinates
    are then all considered active).
    """

    def __init__(self, model: CostModel, anchor: float = math.nan):
        self.model = model
        self.anchor = anchor
        self.entries: list[LedgerEntry] = []
        self.total = 0.0
        self.infeasible = False

    def charge(self, active: VariableSet, count: int = 1) -> float:
        c = self.model.cost(active)
        if math.isinf(c):
            self.infeasible = True
        self.entries.append(LedgerEntry(active, c, count))
        self.total += c * count
        return c

    def charge_batch(self, structural: VariableSet, values: np.ndarray) -> None:
        """Charge a batch at the true minimal active set of each point."""
        n = values.shape[0] if values.ndim else 0
        if n == 0:
            return
        if not np.any(values == self.anchor):
            self.charge(structural, count=n)
            return
        for row in values:
            active = VariableSet(
                tuple(
                    j
                    for j, x in zip(structural.indices, row)
                    if x != self.anchor
                )
            )
            self.charge(active)

    @property
    def n_evals(self) -> int:
        return sum(e.count for e in self.entries)

    def iter_evaluations(self) -> Iterator[tuple[VariableSet, float]]:
        for e in self.entries:
            for _ in range(e.count):
                yield e.active, e.charged

    def set_sequence(self) -> tuple[tuple[VariableSet, int], ...]:
        return tuple((e.active, e.count) for e in self.entries)

    def merge(self, other: "CostLedger") -> "CostLedger":
        out = CostLedger(self.model, self.anchor)
        out.entries = self.entries + other.entries
        out.total = self.total + other.total
        out.infeasible = self.infeasible or other.infeasible
        return out

    def to_csv(self) -> str:
        lines = ["eval_index,active_set,charged"]
        for i, (u, c) in enumerate(self.iter_evaluations(), start=1):
            lines.append(f"{i},\"{u}\",{c!r}")
        return "\n".join(lines) + "\n"


def charge(L: CostLedger, point_batch) -> CostLedger:
    """Charge a sparse point (or batch) against the ledger's model."""
    L.charge_batch(point_batch.active, np.asarray(point_batch.values))
    return L


# ---------------------------------------------------------------------------
# Algorithm-class certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassCertificate:
    class_name: str  # "ran" | "res" | "res_omega"
    n: Optional[int] = None
    sets: tuple[VariableSet, ...] = ()
    omega: Optional[int] = None


def _trace_sets(trace) -> list[tuple[VariableSet, int]]:
    if isinstance(trace, CostLedger):
        return [(e.active, e.count) for e in trace.entries]
    return [
        (u, c) if isinstance(u, VariableSet) else (VariableSet.of(u), c)
        for u, c in trace
    ]


def certify_class(traces: Sequence, omega: Optional[int] = None) -> ClassCertificate:
    """Certify the smallest algorithm class consistent with the traces.

    ``res`` requires the same evaluation count on every input, with the
    i-th sample's active set always inside a common set v_i (taken as the
    union across traces); ``res_omega`` additionally caps |v_i| by omega.
    Anything else falls back to ``ran``.
    """
    if not traces:
        raise ParameterError("certification needs at least one trace")
    compressed = [_trace_sets(t) for t in traces]

    def expanded_len(runs):
        return sum(c for _, c in runs)

    n0 = expanded_len(compressed[0])
    if any(expanded_len(r) != n0 for r in compressed[1:]):
        return ClassCertificate(class_name="ran")

    # Union the i-th active set across traces, expanding compressed runs.
    unions: list[VariableSet] = []
    iters = [_expand(r) for r in compressed]
    for _ in range(n0):
        sets_i = [next(it) for it in iters]
        v = sets_i[0]
        for s in sets_i[1:]:
            v = v.union(s)
        unions.append(v)
    cert = ClassCertificate(class_name="res", n=n0, sets=tuple(unions))
    if omega is not None:
        if all(len(v) <= omega for v in unions):
            return ClassCertificate(
                class_name="res_omega", n=n0, sets=tuple(unions), omega=omega
            )
        return cert
    return cert


def _expand(runs: list[tuple[VariableSet, int]]) -> Iterator[VariableSet]:
    for u, c in runs:
        for _ in range(c):
            yield u
