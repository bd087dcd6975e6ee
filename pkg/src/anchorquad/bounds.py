"""Projection error, fooling pairs, and tractability-exponent bounds.

Sampling only inside the subspaces of a cover family {v_i} pins an
algorithm to the orthogonal projection onto the components contained in
some v_i.  The squared integration error this forces is the hat-weight
mass of the uncovered sets; the function realizing it is the normalized
residual of the integration representer.  The exponent calculators turn
the weight calculus (decay and box-growth exponents) into lower bounds
on the exponent of strong polynomial tractability for the three
algorithm classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import (
    AlgorithmClassError,
    DegenerateInputError,
    EnumerationError,
    ParameterError,
)
from .rkhs import AnchoredFunction, Kernel1D, MeanEmbedding, Term, func_integral_exact
from .sets import VariableSet
from .weights import (
    INF,
    WeightFamily,
    iter_ordered,
    operator_norm_sq,
    decay as weight_decay,
    tstar as weight_tstar,
)
from .costs import certify_class

MODELS = ("nest_ran", "unr_res", "unr_res_omega")


@dataclass(frozen=True)
class CoverFamily:
    """The sets v_1..v_n an algorithm is allowed to sample in."""

    sets: tuple[VariableSet, ...]

    def __post_init__(self) -> None:
        if not self.sets:
            raise ParameterError("a cover needs at least one set")
        # drop duplicates, keep first occurrences
        seen: dict[VariableSet, None] = {}
        for v in self.sets:
            seen.setdefault(v, None)
        object.__setattr__(self, "sets", tuple(seen))

    @classmethod
    def of(cls, sets: Iterable[Iterable[int]]) -> "CoverFamily":
        return cls(tuple(VariableSet.of(s) for s in sets))

    def covers(self, u: VariableSet) -> bool:
        return any(u.issubset(v) for v in self.sets)


def project(f: AnchoredFunction, cover: CoverFamily) -> AnchoredFunction:
    """Keep exactly the terms whose set is contained in some cover member."""
    return AnchoredFunction(
        f.kernel, tuple(t for t in f.terms if cover.covers(t.u))
    )


@dataclass(frozen=True)
class BsqReport:
    """Uncovered hat-weight mass (squared projection error).

    ``value`` is the enumerated lower estimate; the true mass lies within
    ``tail_bound`` above it.  ``covered_mass`` and ``total_mass`` make the
    complement identity checkable: value + covered + unenumerated tail
    equals the total nonempty mass.
    """

    value: float
    covered_mass: float
    total_mass: float
    tail_bound: float
    truncation_rank: int


def b_squared(
    W: WeightFamily, cover: CoverFamily, tail_tol: float = 1e-10,
    cap: int = 10_000_000,
) -> BsqReport:
    """Sum of hat weights over support sets not inside any cover member."""
    mass = operator_norm_sq(W, tail_tol=min(tail_tol * 1e-2, 1e-12))
    total_hi = mass.nonempty + mass.tail_bound
    covered = 0.0
    uncovered = 0.0
    rank = 0
    tail = total_hi
    for entry in iter_ordered(W, INF, cap=cap):
        rank = entry.rank
        if cover.covers(entry.u):
            covered += entry.gamma_hat
        else:
            uncovered += entry.gamma_hat
        tail = total_hi - covered - uncovered
        if tail <= tail_tol:
            break
        if rank >= cap:
            raise EnumerationError(
                f"uncovered-mass enumeration truncated at rank {rank} with "
                f"tail {tail:.3e} > {tail_tol:.3e}"
            )
    return BsqReport(
        value=uncovered,
        covered_mass=covered,
        total_mass=mass.nonempty,
        tail_bound=max(tail, 0.0),
        truncation_rank=rank,
    )


def covered_mass_closed(W: WeightFamily, cover: CoverFamily) -> float:
    """Closed-form hat mass of the nonempty sets inside some cover member.

    Inclusion-exclusion over cover intersections; each term is the
    restricted subset sum with per-coordinate factor C0.
    """
    from itertools import combinations

    c0 = W.require_c0()
    n = len(cover.sets)
    total = 0.0
    for r in range(1, n + 1):
        for combo in combinations(cover.sets, r):
            inter = combo[0]
            for v in combo[1:]:
                inter = inter.intersection(v)
            factors = {j: c0 for j in inter}
            mass = W.restricted_sum(factors) - W.weight_of(VariableSet())
            total += ((-1.0) ** (r + 1)) * mass
    return total


def worst_case_residual(
    W: WeightFamily,
    cover: CoverFamily,
    rank_cap: int,
    kernel: Kernel1D,
) -> tuple[AnchoredFunction, float]:
    """The unit-norm function the cover cannot see, and its integral.

    Builds the representer residual over the first ``rank_cap`` uncovered
    support sets (components gamma_u * prod mean embeddings), normalized
    to unit weighted norm.  Its integral equals the square root of the
    truncated uncovered mass, which approaches the full projection error
    from below.
    """
    if rank_cap < 1:
        raise ParameterError("rank_cap must be >= 1")
    picked: list[tuple[VariableSet, float, float]] = []
    for entry in iter_ordered(W, INF):
        if entry.rank > rank_cap:
            break
        if not cover.covers(entry.u):
            picked.append((entry.u, entry.gamma, entry.gamma_hat))
    if not picked:
        raise DegenerateInputError(
            "no uncovered set with positive weight within the rank cap"
        )
    mass = sum(gh for _, _, gh in picked)
    achieved = math.sqrt(mass)
    # h_u = gamma_u * prod_j m_k(x_j); dividing by achieved normalizes.
    terms = tuple(
        Term(
            u=u,
            coeff=g / achieved,
            atoms=tuple(MeanEmbedding() for _ in u),
        )
        for u, g, _ in picked
    )
    return AnchoredFunction(kernel, terms), achieved


# ---------------------------------------------------------------------------
# Exponent bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmaTerm:
    sigma: float
    decay: float
    tstar: Optional[float]
    term: float


@dataclass(frozen=True)
class ExponentBound:
    model: str
    alpha: float
    s: float
    per_sigma: tuple[SigmaTerm, ...]
    bound: float
    necessary_condition_ok: bool


def _decay_value(W: WeightFamily, sigma) -> float:
    rep = weight_decay(W, sigma, ranks=256)
    if rep.closed_form is not None:
        return rep.closed_form
    return rep.estimate


def _tstar_value(W: WeightFamily, sigma) -> float:
    rep = weight_tstar(W, sigma)
    if rep.closed_form is not None:
        return rep.closed_form
    if rep.estimate is None:
        return 0.0
    return rep.estimate


def exponent_lower_bound(
    model: str,
    alpha: float,
    s: float,
    W: WeightFamily,
    sigmas: Sequence[int],
) -> ExponentBound:
    """Lower bound on the exponent of strong polynomial tractability.

    nest_ran:       max(2/alpha, sup_sigma (2 s / t*_sigma) / (decay_sigma - 1))
    unr_res:        max(2/alpha, sup_sigma 2 min(1, s/t*_sigma) / (decay_sigma - 1))
    unr_res_omega:  max(2/alpha, sup_sigma 2 / (decay_sigma - 1))

    The supremum is probed from below over the given cut-off orders, which
    keeps the result a valid lower bound.  Saturating families (finite
    support, infinite decay) contribute nothing beyond 2/alpha.
    """
    if model not in MODELS:
        raise ParameterError(f"model must be one of {MODELS}")
    if alpha <= 0 or s <= 0:
        raise ParameterError("alpha and s must be positive")
    if not sigmas:
        raise ParameterError("need at least one cut-off order to probe")

    terms: list[SigmaTerm] = []
    ok = True
    best = 2.0 / alpha
    for sigma in sigmas:
        d = _decay_value(W, sigma)
        if d <= 1.0:
            terms.append(SigmaTerm(sigma=float(sigma), decay=d, tstar=None, term=INF))
            ok = False
            continue
        if math.isinf(d):
            # vacuous tail: no mass constraint at this order
            terms.append(SigmaTerm(sigma=float(sigma), decay=d, tstar=None, term=0.0))
            continue
        t = _tstar_value(W, sigma)
        if model == "nest_ran":
            if t <= 0.0:
                term = 0.0
            else:
                term = (2.0 * s / t) / (d - 1.0)
        elif model == "unr_res":
            ratio = 1.0 if t <= 0.0 else min(1.0, s / t)
            term = 2.0 * ratio / (d - 1.0) if t > 0.0 else 0.0
        else:
            term = 2.0 / (d - 1.0)
        terms.append(SigmaTerm(sigma=float(sigma), decay=d, tstar=t, term=term))
        best = max(best, term)

    bound = INF if not ok else best
    return ExponentBound(
        model=model,
        alpha=alpha,
        s=s,
        per_sigma=tuple(terms),
        bound=bound,
        necessary_condition_ok=ok,
    )


def pw11_upper_bound(kappa: float, W: WeightFamily) -> float:
    """Known changing-dimension upper bound max(2/kappa, 2/(decay_1 - 1)).

    Pairs with the unr_res lower bound to exhibit the sharpness window.
    """
    if kappa <= 0:
        raise ParameterError("kappa must be positive")
    d = _decay_value(W, 1)
    if d <= 1.0:
        return INF
    if math.isinf(d):
        return 2.0 / kappa
    return max(2.0 / kappa, 2.0 / (d - 1.0))


def fooling_error_bound(theta: float, bsq: float) -> float:
    """Squared-error lower bound (2*theta - 1) * b^2 for an algorithm that
    returns the same output on f and its cover projection with probability
    at least theta (pure formula evaluator)."""
    if not 0.5 < theta <= 1.0:
        raise ParameterError("theta must lie in (1/2, 1]")
    return (2.0 * theta - 1.0) * bsq


@dataclass(frozen=True)
class FoolingReport:
    empirical_rmse: float
    b_value: float
    achieved: float
    replications: int
    certificate_class: str


def fooling_experiment(
    Q: Callable[[AnchoredFunction, int], object],
    W: WeightFamily,
    cover: CoverFamily,
    replications: int,
    seed: int,
    kernel: Kernel1D,
    rank_cap: int = 64,
    tail_tol: float = 1e-10,
) -> FoolingReport:
    """Run an algorithm on the fooling pair +-g and report its error.

    ``Q`` maps (integrand, seed) to a QuadratureResult-like object with
    ``estimate`` and ``set_sequence``.  Both members of the pair vanish on
    every cover subspace, so a cover-confined algorithm receives identical
    data on both and must err by at least the pair's integral on one of
    them.  The certification is checked from the recorded traces.
    """
    if replications < 1:
        raise ParameterError("need at least one replication")
    g, achieved = worst_case_residual(W, cover, rank_cap, kernel)
    neg_g = g.scaled(-1.0)
    bsq = b_squared(W, cover, tail_tol=tail_tol)

    results_pos = [Q(g, seed + r) for r in range(replications)]
    results_neg = [Q(neg_g, seed + r) for r in range(replications)]

    traces = [res.set_sequence for res in results_pos + results_neg]
    cert = certify_class(traces)
    if cert.class_name != "res":
        raise AlgorithmClassError(
            "fooling experiment needs a fixed-sample-pattern algorithm"
        )
    for v in cert.sets:
        if not cover.covers(v):
            raise AlgorithmClassError(
                f"algorithm samples outside the cover: {v}"
            )

    i_pos = func_integral_exact(g)
    err_pos = np.array([res.estimate for res in results_pos]) - i_pos
    err_neg = np.array([res.estimate for res in results_neg]) + i_pos
    rmse = max(
        float(np.sqrt(np.mean(err_pos**2))),
        float(np.sqrt(np.mean(err_neg**2))),
    )
    return FoolingReport(
        empirical_rmse=rmse,
        b_value=math.sqrt(bsq.value + bsq.tail_bound),
        achieved=achieved,
        replications=replications,
        certificate_class=cert.class_name,
    )
