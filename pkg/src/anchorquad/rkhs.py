"""Anchored univariate kernels, product kernels, and explicit test integrands.

The univariate kernel k has an anchor a with k(a, a) = 0, which forces
k(., a) = 0 and gives every product-kernel space the anchored vanishing
property: a component supported on u is zero wherever a coordinate of u
sits at the anchor.  Integrands are represented explicitly as finite sums

    f = sum_terms  coeff * prod_{j in u} atom_j(x_j),

with atoms drawn from {k(., t), mean embedding m_k}.  All inner products,
integrals, and norms of such functions are closed-form, so quadrature
error can be measured against exact ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    BudgetError,
    DomainError,
    IntegrationFailureError,
    ShapeError,
)
from .sets import EMPTY_SET, SparseBatch, VariableSet

ArrayLike = Union[float, np.ndarray]


# ---------------------------------------------------------------------------
# Univariate kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel1D:
    """An anchored reproducing kernel on an interval.

    ``M`` is the diagonal mean  ∫ k(x,x) ρ(dx)  and ``C0`` the full mean
    ∬ k(x,y) ρ(dx) ρ(dy); ``mean_fn`` is m_k(t) = ∫ k(x,t) ρ(dx).  The
    measure ρ is uniform on ``domain``.
    """

    family: str
    domain: tuple[float, float]
    anchor: float
    M: float
    C0: float
    kernel_fn: Callable[[ArrayLike, ArrayLike], ArrayLike]
    mean_fn: Callable[[ArrayLike], ArrayLike]
    constants_tol: float = 0.0

    def __post_init__(self) -> None:
        lo, hi = self.domain
        if not lo <= self.anchor <= hi:
            raise DomainError(f"anchor {self.anchor} outside domain {self.domain}")
        if not 0.0 < self.C0 <= self.M + 1e-12:
            raise IntegrationFailureError(
                f"kernel constants violate 0 < C0 <= M: M={self.M}, C0={self.C0}"
            )

    def check_domain(self, *xs: ArrayLike) -> None:
        lo, hi = self.domain
        for x in xs:
            arr = np.asarray(x)
            if np.any(arr < lo) or np.any(arr > hi):
                raise DomainError(f"point outside domain [{lo}, {hi}]")


def wiener_kernel(scale: float = 1.0) -> Kernel1D:
    """The anchored Wiener kernel c*min(x,y) on [0,1], anchor 0.

    Closed forms: M = c/2, C0 = c/3, m_k(t) = c*(t - t^2/2).
    """
    if scale <= 0:
        raise DomainError("kernel scale must be positive")
    c = float(scale)
    return Kernel1D(
        family="wiener",
        domain=(0.0, 1.0),
        anchor=0.0,
        M=c * 0.5,
        C0=c / 3.0,
        kernel_fn=lambda x, y: c * np.minimum(x, y),
        mean_fn=lambda t: c * (np.asarray(t) - np.square(t) / 2.0),
    )


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def tabulated_kernel(
    kernel_fn: Callable[[ArrayLike, ArrayLike], ArrayLike],
    domain: tuple[float, float] = (0.0, 1.0),
    anchor: float = 0.0,
    grid_points: int = 2**14 + 1,
) -> Kernel1D:
    """Wrap an arbitrary anchored kernel; constants come from quadrature.

    M and C0 are computed by composite Simpson quadrature on a uniform
    grid (odd point count); the step-squared tolerance is recorded in
    ``constants_tol``.  The mean function is likewise evaluated by
    Simpson quadrature against the grid.
    """
    if grid_points < 3:
        raise DomainError("tabulated kernel needs at least 3 grid points")
    if grid_points % 2 == 0:
        grid_points += 1
    lo, hi = domain
    grid = np.linspace(lo, hi, grid_points)
    h = (hi - lo) / (grid_points - 1)
    w = _simpson_weights(grid_points, h)
    length = hi - lo

    diag = np.asarray(kernel_fn(grid, grid), dtype=float)
    M = float(w @ diag) / length

    # C0 = w^T K w, in row blocks to avoid materializing the full Gram matrix.
    acc = 0.0
    block = max(1, 2**22 // grid_points)
    for start in range(0, grid_points, block):
        rows = grid[start : start + block, None]
        K = np.asarray(kernel_fn(rows, grid[None, :]), dtype=float)
        acc += float(w[start : start + block] @ (K @ w))
    C0 = acc / length**2

    if not (np.isfinite(M) and np.isfinite(C0)):
        raise IntegrationFailureError("kernel constant quadrature diverged")

    def mean_fn(t: ArrayLike) -> ArrayLike:
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        vals = np.asarray(kernel_fn(grid[None, :], tt[:, None]), dtype=float)
        out = (vals @ w) / length
        return out if np.ndim(t) else float(out[0])

    return Kernel1D(
        family="tabulated",
        domain=domain,
        anchor=anchor,
        M=M,
        C0=C0,
        kernel_fn=kernel_fn,
        mean_fn=mean_fn,
        constants_tol=h**2,
    )


def kernel_eval(k: Kernel1D, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """Evaluate k(x, y); raises DomainError off the kernel's interval."""
    k.check_domain(x, y)
    out = k.kernel_fn(x, y)
    return float(out) if np.ndim(out) == 0 else out


def kernel_constants(k: Kernel1D) -> tuple[float, float]:
    """Return (M, C0)."""
    return k.M, k.C0


def ku_eval(k: Kernel1D, u: VariableSet, x: SparseBatch, y: SparseBatch) -> ArrayLike:
    """Product kernel k_u(x, y) = prod_{j in u} k(x_j, y_j); k_emptyset = 1."""
    xcols = _coordinate_columns(k, u, x)
    ycols = _coordinate_columns(k, u, y)
    n = max(x.n, y.n)
    out = np.ones(n)
    for j in u:
        out = out * np.asarray(kernel_eval(k, xcols[j], ycols[j]))
    return float(out[0]) if n == 1 else out


def _coordinate_columns(
    k: Kernel1D, u: VariableSet, batch: SparseBatch
) -> dict[int, np.ndarray]:
    cols: dict[int, np.ndarray] = {}
    for j in u:
        if j in batch.active:
            cols[j] = batch.column(j)
        else:
            cols[j] = np.full(batch.n, k.anchor)
    return cols


@dataclass(frozen=True)
class KgammaValue:
    value: float
    tail_bound: float


def Kgamma_eval(k: Kernel1D, weights, x: SparseBatch, y: SparseBatch,
                tail_tol: float = 1e-12) -> KgammaValue:
    """The superposition kernel K_gamma(x, y) = sum_u gamma_u k_u(x, y).

    Because k is anchored, k_u(x, y) vanishes unless u is contained in the
    intersection of the two points' non-anchor supports, so the sum is a
    finite one over subsets of that intersection.  Weight families with a
    product structure evaluate it in closed form; other families enumerate
    the subsets under a combinatorial guard.
    """
    if x.n != 1 or y.n != 1:
        raise ShapeError("Kgamma_eval expects single points")
    ax = VariableSet.of(
        j for j in x.active if float(x.column(j)[0]) != k.anchor
    )
    ay = VariableSet.of(
        j for j in y.active if float(y.column(j)[0]) != k.anchor
    )
    common = ax.intersection(ay)
    factors = {
        j: float(np.asarray(kernel_eval(k, x.column(j)[0], y.column(j)[0])))
        for j in common
    }
    value = weights.restricted_sum(factors)
    if value > tail_tol and not weights.summable():
        raise IntegrationFailureError(
            "weight family fails the summability certificate"
        )
    return KgammaValue(value=value, tail_bound=0.0)


# ---------------------------------------------------------------------------
# Atoms and explicit anchored functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelTranslate:
    """The atom k(., t) in H(k)."""

    t: float


@dataclass(frozen=True)
class MeanEmbedding:
    """The atom m_k = ∫ k(., y) ρ(dy) in H(k)."""


Atom = Union[KernelTranslate, MeanEmbedding]


def atom_eval(k: Kernel1D, atom: Atom, x: ArrayLike) -> ArrayLike:
    if isinstance(atom, KernelTranslate):
        return kernel_eval(k, x, atom.t)
    return k.mean_fn(x)


def atom_integral(k: Kernel1D, atom: Atom) -> float:
    """∫ atom(x) ρ(dx): m_k(t) for a translate, C0 for the mean embedding."""
    if isinstance(atom, KernelTranslate):
        return float(np.asarray(k.mean_fn(atom.t)))
    return k.C0


def atom_inner(k: Kernel1D, a: Atom, b: Atom) -> float:
    """Closed-form H(k) inner products of the two atom kinds."""
    if isinstance(a, KernelTranslate) and isinstance(b, KernelTranslate):
        return float(np.asarray(kernel_eval(k, a.t, b.t)))
    if isinstance(a, KernelTranslate):
        return float(np.asarray(k.mean_fn(a.t)))
    if isinstance(b, KernelTranslate):
        return float(np.asarray(k.mean_fn(b.t)))
    return k.C0


@dataclass(frozen=True)
class Term:
    """One product term coeff * prod_{j in u} atom_j(x_j)."""

    u: VariableSet
    coeff: float
    atoms: tuple[Atom, ...]

    def __post_init__(self) -> None:
        if len(self.atoms) != len(self.u):
            raise ShapeError(
                f"term on {self.u} needs {len(self.u)} atoms, got {len(self.atoms)}"
            )


@dataclass(frozen=True)
class AnchoredFunction:
    """An explicit element of the weighted superposition space."""

    kernel: Kernel1D
    terms: tuple[Term, ...] = ()

    def __call__(self, batch: SparseBatch) -> np.ndarray:
        return func_eval(self, batch)

    @property
    def support(self) -> tuple[VariableSet, ...]:
        seen: dict[VariableSet, None] = {}
        for t in self.terms:
            seen.setdefault(t.u, None)
        return tuple(seen)

    def scaled(self, c: float) -> "AnchoredFunction":
        return AnchoredFunction(
            self.kernel,
            tuple(replace(t, coeff=t.coeff * c) for t in self.terms),
        )


def func_eval(f: AnchoredFunction, x: SparseBatch) -> np.ndarray:
    """Evaluate f at a batch of sparse points (missing coords = anchor)."""
    k = f.kernel
    out = np.zeros(x.n)
    for term in f.terms:
        vals = np.full(x.n, term.coeff)
        cols = _coordinate_columns(k, term.u, x)
        for j, atom in zip(term.u, term.atoms):
            vals = vals * np.asarray(atom_eval(k, atom, cols[j]))
        out += vals
    return out


def func_eval_point(f: AnchoredFunction, x: SparseBatch) -> float:
    return float(func_eval(f, x)[0])


def func_integral_exact(f: AnchoredFunction) -> float:
    """I(f), exact: each atom integrates in closed form under ρ."""
    total = 0.0
    for term in f.terms:
        v = term.coeff
        for atom in term.atoms:
            v *= atom_integral(f.kernel, atom)
        total += v
    return total


def component_sq_norms(f: AnchoredFunction) -> dict[VariableSet, float]:
    """||f_u||^2 in each product space H_u, from the closed-form atom Gram."""
    groups: dict[VariableSet, list[Term]] = {}
    for t in f.terms:
        groups.setdefault(t.u, []).append(t)
    out: dict[VariableSet, float] = {}
    for u, terms in groups.items():
        c = np.array([t.coeff for t in terms])
        G = np.empty((len(terms), len(terms)))
        for i, ti in enumerate(terms):
            for jj, tj in enumerate(terms[: i + 1]):
                g = 1.0
                for ai, aj in zip(ti.atoms, tj.atoms):
                    g *= atom_inner(f.kernel, ai, aj)
                G[i, jj] = G[jj, i] = g
        out[u] = float(c @ G @ c)
    return out


def func_norm(f: AnchoredFunction, weights) -> float:
    """The weighted norm ( sum_u gamma_u^{-1} ||f_u||^2 )^{1/2}.

    Raises NotInSpaceError when a term sits on a set of zero weight.
    """
    from .errors import NotInSpaceError

    total = 0.0
    for u, sq in component_sq_norms(f).items():
        gamma = weights.weight_of(u)
        if gamma <= 0.0:
            raise NotInSpaceError(
                f"component on {u} has weight 0: function is outside the space"
            )
        total += sq / gamma
    return math.sqrt(max(total, 0.0))


def inner_product(f: AnchoredFunction, g: AnchoredFunction, weights) -> float:
    """The weighted inner product of two explicit functions (test utility)."""
    from .errors import NotInSpaceError

    fg: dict[VariableSet, tuple[list[Term], list[Term]]] = {}
    for t in f.terms:
        fg.setdefault(t.u, ([], []))[0].append(t)
    for t in g.terms:
        fg.setdefault(t.u, ([], []))[1].append(t)
    total = 0.0
    for u, (fts, gts) in fg.items():
        if not fts or not gts:
            continue
        gamma = weights.weight_of(u)
        if gamma <= 0.0:
            raise NotInSpaceError(f"component on {u} has weight 0")
        acc = 0.0
        for ti in fts:
            for tj in gts:
                val = ti.coeff * tj.coeff
                for ai, aj in zip(ti.atoms, tj.atoms):
                    val *= atom_inner(f.kernel, ai, aj)
                acc += val
        total += acc / gamma
    return total


# ---------------------------------------------------------------------------
# Anchored restriction and the anchored decomposition
# ---------------------------------------------------------------------------

Integrand = Callable[[SparseBatch], np.ndarray]

COMPONENT_GUARD = 25


def anchor_restrict(f: Integrand, v: VariableSet, x: SparseBatch) -> np.ndarray:
    """Evaluate f at the point agreeing with x on v and anchored elsewhere."""
    return np.asarray(f(x.restrict(v)))


def anchored_component_eval(
    f: Integrand, u: VariableSet, x: SparseBatch
) -> np.ndarray:
    """The anchored component f_u at x, by inclusion-exclusion.

    Uses exactly 2^|u| black-box evaluations, each with active set
    contained in u:  f_u(x) = sum_{w subseteq u} (-1)^{|u|-|w|} f(x_w; a).
    """
    if len(u) > COMPONENT_GUARD:
        raise BudgetError(
            f"inclusion-exclusion over {len(u)} coordinates exceeds the "
            f"2^{COMPONENT_GUARD} evaluation guard"
        )
    size = len(u)
    out = np.zeros(x.n)
    for w in u.subsets():
        sign = -1.0 if (size - len(w)) % 2 else 1.0
        out += sign * anchor_restrict(f, w, x)
    return out


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


class ProductMeasureSampler:
    """Coordinate-wise uniform sampling on the kernel's interval.

    Coordinates outside the requested active set stay at the anchor.  The
    same seed always reproduces the same stream; use :meth:`spawn` to
    derive independent streams for replications or levels.
    """

    def __init__(self, kernel: Kernel1D, seed: int, _key: tuple[int, ...] = ()):
        self.kernel = kernel
        self.seed = int(seed)
        self._key = _key
        self._rng = np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=_key)
        )

    def draw(self, active: VariableSet, n: int) -> SparseBatch:
        lo, hi = self.kernel.domain
        vals = lo + (hi - lo) * self._rng.random((n, len(active)))
        return SparseBatch(active, vals)

    def draw_stratified(self, active: VariableSet, n: int) -> SparseBatch:
        """One uniform draw per stratum of an n-way split of the interval,
        applied to a single coordinate (still distributed as n draws of
        the product measure, but negatively coupled across strata)."""
        if len(active) != 1:
            raise ShapeError("stratified draws are univariate")
        lo, hi = self.kernel.domain
        vals = lo + (np.arange(n) + self._rng.random(n)) * ((hi - lo) / n)
        return SparseBatch(active, vals.reshape(-1, 1))

    def draw_grid_jittered(self, active: VariableSet, n: int) -> SparseBatch:
        """n draws of the bivariate product measure, the first m^2 of them
        jittered on an m x m grid (m = isqrt(n)) and the rest independent.
        Each point is marginally product-uniform, so sample means stay
        unbiased."""
        if len(active) != 2:
            raise ShapeError("grid-jittered draws are bivariate")
        lo, hi = self.kernel.domain
        m = int(math.isqrt(n))
        cells = np.stack(
            np.meshgrid(np.arange(m), np.arange(m), indexing="ij"), axis=-1
        ).reshape(-1, 2)
        grid = lo + (cells + self._rng.random((m * m, 2))) * ((hi - lo) / m)
        rest = lo + (hi - lo) * self._rng.random((n - m * m, 2))
        return SparseBatch(active, np.concatenate([grid, rest], axis=0))

    def spawn(self, *key: int) -> "ProductMeasureSampler":
        return ProductMeasureSampler(self.kernel, self.seed, self._key + key)


# ---------------------------------------------------------------------------
# Serialization: value-exact JSON round trip
# ---------------------------------------------------------------------------


def _atom_to_obj(atom: Atom) -> dict:
    if isinstance(atom, KernelTranslate):
        return {"kind": "translate", "t": atom.t}
    return {"kind": "mean"}


def _atom_from_obj(obj: Mapping) -> Atom:
    kind = obj.get("kind")
    if kind == "translate":
        return KernelTranslate(float(obj["t"]))
    if kind == "mean":
        return MeanEmbedding()
    raise ShapeError(f"unknown atom kind {kind!r}")


def function_to_json(f: AnchoredFunction) -> str:
    doc = {
        "terms": [
            {
                "u": list(t.u.indices),
                "coeff": t.coeff,
                "atoms": [_atom_to_obj(a) for a in t.atoms],
            }
            for t in f.terms
        ]
    }
    return json.dumps(doc, indent=2)


def function_from_json(text: str, kernel: Kernel1D) -> AnchoredFunction:
    doc = json.loads(text)
    terms = []
    for t in doc.get("terms", []):
        u = VariableSet.of(t["u"])
        atoms = tuple(_atom_from_obj(a) for a in t.get("atoms", []))
        terms.append(Term(u=u, coeff=float(t["coeff"]), atoms=atoms))
    return AnchoredFunction(kernel, tuple(terms))
