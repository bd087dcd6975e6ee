"""Randomized quadrature engines instrumented with cost ledgers.

All engines are unbiased for the integral of what they can see (the
projection onto their sampling subspaces) and reproduce bit-for-bit from
their seed.  Every black-box evaluation is charged to the ledger at the
true minimal active set of its point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .costs import (
    CostLedger,
    CostModel,
    DollarFunction,
    NestedChain,
    NestedModel,
    UnrestrictedModel,
    poly_dollar,
)
from .errors import ParameterError
from .rkhs import (
    AnchoredFunction,
    Integrand,
    Kernel1D,
    ProductMeasureSampler,
    anchored_component_eval,
    wiener_kernel,
)
from .sets import EMPTY_SET, SparseBatch, VariableSet
from .weights import WeightFamily, iter_ordered


@dataclass(frozen=True)
class QuadratureResult:
    estimate: float
    ledger: CostLedger
    n_evals: int
    seed: int
    set_sequence: tuple[tuple[VariableSet, int], ...]
    level_means: tuple[float, ...] = ()


class _Oracle:
    """Wraps an integrand so each evaluation is charged to a ledger."""

    def __init__(self, f: Integrand, model: CostModel, anchor: float):
        self.f = f
        self.ledger = CostLedger(model, anchor)

    def __call__(self, batch: SparseBatch) -> np.ndarray:
        out = np.asarray(self.f(batch), dtype=float)
        self.ledger.charge_batch(batch.active, batch.values)
        return out


def _default_model() -> CostModel:
    return UnrestrictedModel(poly_dollar(1.0))


def _result(oracle: _Oracle, estimate: float, seed: int, level_means=()) -> QuadratureResult:
    led = oracle.ledger
    return QuadratureResult(
        estimate=float(estimate),
        ledger=led,
        n_evals=led.n_evals,
        seed=seed,
        set_sequence=led.set_sequence(),
        level_means=tuple(level_means),
    )


def mc_quad(
    f: Integrand,
    v: VariableSet,
    n: int,
    sampler: ProductMeasureSampler,
    cost_model: Optional[CostModel] = None,
) -> QuadratureResult:
    """Plain Monte Carlo on the subspace of points active only on v."""
    if n < 1:
        raise ParameterError("need n >= 1 samples")
    oracle = _Oracle(f, cost_model or _default_model(), sampler.kernel.anchor)
    batch = sampler.draw(v, n)
    vals = oracle(batch)
    return _result(oracle, float(np.mean(vals)), sampler.seed)


def uni_quad_rate3(
    f: Integrand,
    n: int,
    seed: int,
    kernel: Optional[Kernel1D] = None,
    cost_model: Optional[CostModel] = None,
) -> QuadratureResult:
    """Univariate quadrature with root-mean-square error O(n^(-3/2)).

    One evaluation pins the secant through the anchor and the far end of
    the interval; that linear part integrates exactly, and the residual is
    estimated by stratified sampling with one point per stratum.  Exact on
    linear functions, unbiased in general, and rate-optimal (up to
    constants) on the unit ball of the anchored space.
    """
    if n < 4 or n % 2:
        raise ParameterError("need an even sample count n >= 4")
    kernel = kernel or wiener_kernel()
    lo, hi = kernel.domain
    if kernel.anchor != lo:
        raise ParameterError("univariate scheme assumes the anchor at the left end")
    oracle = _Oracle(f, cost_model or _default_model(), kernel.anchor)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    coord = VariableSet((1,))

    fb = float(oracle(SparseBatch.single(coord, [hi]))[0])
    m = n - 1
    width = hi - lo
    u = lo + (np.arange(m) + rng.random(m)) * (width / m)
    vals = oracle(SparseBatch(coord, u.reshape(-1, 1)))
    residual = vals - fb * (u - lo) / width
    estimate = fb / 2.0 + float(np.mean(residual))
    return _result(oracle, estimate, seed)


@dataclass(frozen=True)
class LevelPlan:
    """Subspace and replication count per telescoping level."""

    levels: tuple[tuple[VariableSet, int], ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ParameterError("a level plan needs at least one level")
        prev: Optional[VariableSet] = None
        for v, nl in self.levels:
            if nl < 1:
                raise ParameterError("level replication counts must be >= 1")
            if prev is not None and not (prev.issubset(v) and len(prev) < len(v)):
                raise ParameterError(
                    f"levels must strictly increase: {prev} then {v}"
                )
            prev = v

    @classmethod
    def of(cls, pairs: Sequence[tuple]) -> "LevelPlan":
        return cls(
            tuple(
                (v if isinstance(v, VariableSet) else VariableSet.of(v), int(nl))
                for v, nl in pairs
            )
        )


def multilevel_quad(
    f: Integrand,
    plan: LevelPlan,
    sampler: ProductMeasureSampler,
    cost_model: Optional[CostModel] = None,
) -> QuadratureResult:
    """Telescoping Monte Carlo over a nested chain of subspaces.

    Level 1 estimates the coarsest anchored restriction; level l >= 2
    estimates the correction between consecutive restrictions with common
    random coordinates on the shared subspace.  Unbiased for the integral
    of the finest restriction.
    """
    if cost_model is None:
        chain = NestedChain(prefix=tuple(v for v, _ in plan.levels))
        cost_model = NestedModel(chain, poly_dollar(1.0))
    oracle = _Oracle(f, cost_model, sampler.kernel.anchor)

    means: list[float] = []
    prev: Optional[VariableSet] = None
    for idx, (v, nl) in enumerate(plan.levels, start=1):
        batch = sampler.spawn(idx).draw(v, nl)
        fine = oracle(batch)
        if prev is None:
            means.append(float(np.mean(fine)))
        else:
            coarse = oracle(batch.restrict(prev))
            means.append(float(np.mean(fine - coarse)))
        prev = v
    return _result(oracle, float(sum(means)), sampler.seed, level_means=means)


@dataclass(frozen=True)
class CDPlan:
    """Per-set sample counts for a changing-dimension run.

    Each access to the component on u costs 2^|u| anchored evaluations,
    each charged at most the dollar value of |u| active variables, so the
    plan respects  sum_j n_j 2^|u_j| $(|u_j|) <= budget.
    """

    entries: tuple[tuple[VariableSet, int], ...]
    budget: float
    dollar: DollarFunction

    def planned_cost(self) -> float:
        return sum(
            nj * (2 ** len(u)) * self.dollar(len(u)) for u, nj in self.entries
        )


def build_cd_plan(
    W: WeightFamily,
    budget: float,
    dollar: DollarFunction,
    rank_cap: int = 100_000,
) -> CDPlan:
    """Greedy budget allocation along the hat-weight order.

    Candidate sets are taken in descending hat-weight order while one
    sample each still fits; samples are allocated proportionally to the
    square root of each set's hat weight (variance matching), floored,
    and the remainder is spent by repeatedly incrementing the set with
    the best variance-reduction proxy per unit cost.  Sets left with no
    samples are dropped.
    """
    import heapq

    remaining = budget - dollar(0)
    if remaining < 0:
        raise ParameterError(
            f"budget {budget} cannot pay for the anchor evaluation"
        )
    cands: list[tuple[VariableSet, float, float]] = []  # (u, sqrt hat, unit cost)
    cum = 0.0
    for entry in iter_ordered(W, math.inf):
        if entry.rank > rank_cap:
            break
        c = (2 ** len(entry.u)) * dollar(len(entry.u))
        if cum + c > remaining:
            break
        cum += c
        cands.append((entry.u, math.sqrt(entry.gamma_hat), c))
    if not cands:
        return CDPlan(entries=(), budget=budget, dollar=dollar)
    denom = sum(w * c for _, w, c in cands)
    lam = remaining / denom
    ns = [int(lam * w) for _, w, _ in cands]
    left = remaining - sum(n * c for n, (_, _, c) in zip(ns, cands))
    heap: list[tuple[float, int]] = []
    for i, (_, w, c) in enumerate(cands):
        n = ns[i]
        gain = w * w / c if n == 0 else w * w / (n * (n + 1) * c)
        heapq.heappush(heap, (-gain, i))
    while heap:
        _, i = heapq.heappop(heap)
        _, w, c = cands[i]
        if c > left:
            continue
        ns[i] += 1
        left -= c
        n = ns[i]
        heapq.heappush(heap, (-(w * w / (n * (n + 1) * c)), i))
    entries = tuple((u, n) for (u, _, _), n in zip(cands, ns) if n >= 1)
    return CDPlan(entries=entries, budget=budget, dollar=dollar)


def cd_quad(
    f: Integrand,
    W: WeightFamily,
    budget: float,
    dollar: DollarFunction,
    seed: int,
    kernel: Optional[Kernel1D] = None,
    plan: Optional[CDPlan] = None,
) -> QuadratureResult:
    """Changing-dimension quadrature driven by the hat-weight order.

    Estimates the integral of each planned anchored component by Monte
    Carlo through inclusion-exclusion oracle accesses, and adds the exact
    anchor value (the empty component).  Single-coordinate components use
    stratified draws (one per stratum), which preserves unbiasedness and
    lets the dominant low-order mass converge at the univariate rate;
    higher-order components use plain product draws.  The sample pattern
    depends only on the plan, never on f.
    """
    kernel = kernel or wiener_kernel()
    if plan is None:
        plan = build_cd_plan(W, budget, dollar)
    oracle = _Oracle(f, UnrestrictedModel(dollar), kernel.anchor)
    sampler = ProductMeasureSampler(kernel, seed)

    anchor_val = float(oracle(SparseBatch(EMPTY_SET, np.zeros((1, 0))))[0])
    estimate = anchor_val
    for j, (u, nj) in enumerate(plan.entries, start=1):
        stream = sampler.spawn(j)
        if len(u) == 1:
            batch = stream.draw_stratified(u, nj)
        elif len(u) == 2 and nj >= 4:
            batch = stream.draw_grid_jittered(u, nj)
        else:
            batch = stream.draw(u, nj)
        comps = anchored_component_eval(oracle, u, batch)
        estimate += float(np.mean(comps))
    return _result(oracle, estimate, seed)


def tensor_mc(
    f_u: Integrand,
    u: VariableSet,
    n: int,
    sampler: ProductMeasureSampler,
) -> float:
    """Plain Monte Carlo estimate of the integral of one component."""
    if n < 1:
        raise ParameterError("need n >= 1 samples")
    if len(u) == 0:
        return float(np.asarray(f_u(SparseBatch(EMPTY_SET, np.zeros((1, 0)))))[0])
    batch = sampler.draw(u, n)
    return float(np.mean(np.asarray(f_u(batch))))
