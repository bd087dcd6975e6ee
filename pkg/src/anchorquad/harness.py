"""Experiment orchestration: budget sweeps, rate fits, bound comparison.

An experiment runs one algorithm over increasing cost budgets against a
finite family of unit-norm test integrands with exactly known integrals,
estimates the worst-case RMSE per budget over replications, fits the
error-vs-cost rate, and compares it with the theoretical rate cap implied
by the tractability-exponent lower bound.  Everything is deterministic
given the master seed.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import yaml

from .bounds import ExponentBound, exponent_lower_bound
from .costs import (
    CostModel,
    DollarFunction,
    NestedChain,
    NestedModel,
    UnrestrictedModel,
    poly_dollar,
    exp_dollar,
    table_dollar,
    explicit_chain,
    doubling_chain,
)
from .errors import ConfigError, ParameterError
from .quadrature import (
    LevelPlan,
    QuadratureResult,
    cd_quad,
    mc_quad,
    multilevel_quad,
    uni_quad_rate3,
)
from .rkhs import (
    AnchoredFunction,
    Kernel1D,
    KernelTranslate,
    MeanEmbedding,
    ProductMeasureSampler,
    Term,
    func_integral_exact,
    func_norm,
    function_from_json,
    tabulated_kernel,
    wiener_kernel,
)
from .sets import VariableSet
from .weights import (
    WeightFamily,
    enumerate_ordered,
    weight_family_from_dict,
    weight_family_to_dict,
    parse_weight_spec,
)

SCHEMA_VERSION = 1
THREADS_ENV = "ANCHORQUAD_THREADS"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: Kernel1D
    weights: WeightFamily
    cost_model: CostModel
    algorithm: Mapping
    test_family: tuple[AnchoredFunction, ...]
    budgets: tuple[float, ...]
    replications: int
    seed: int
    slack: float = 0.2
    bound_spec: Optional[Mapping] = None
    output_dir: Optional[str] = None

    def __post_init__(self) -> None:
        b = self.budgets
        if len(b) < 1 or any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ConfigError("budgets must be strictly increasing")
        if self.replications < 30:
            raise ConfigError("need at least 30 replications")
        if self.algorithm.get("kind") not in ("mc", "uni3", "ml", "cd"):
            raise ConfigError(f"unknown algorithm {self.algorithm.get('kind')!r}")
        for i, f in enumerate(self.test_family):
            nm = func_norm(f, self.weights)
            if abs(nm - 1.0) > 1e-9:
                raise ConfigError(
                    f"test function {i} has norm {nm!r}, expected 1 +- 1e-9"
                )


def _kernel_from_dict(d: Mapping) -> Kernel1D:
    fam = d.get("family", "wiener")
    if fam == "wiener":
        return wiener_kernel(scale=float(d.get("scale", 1.0)))
    if fam == "wiener_tabulated":
        base = wiener_kernel(scale=float(d.get("scale", 1.0)))
        return tabulated_kernel(
            base.kernel_fn,
            domain=base.domain,
            anchor=base.anchor,
            grid_points=int(d.get("grid", 2**14 + 1)),
        )
    raise ConfigError(f"unknown kernel family {fam!r}")


def _dollar_from_dict(d: Mapping) -> DollarFunction:
    kind = d.get("kind", "poly")
    if kind == "poly":
        return poly_dollar(float(d.get("s", 1.0)))
    if kind == "exp":
        return exp_dollar(float(d.get("r", 0.0)))
    if kind == "table":
        return table_dollar(d["values"])
    raise ConfigError(f"unknown dollar kind {kind!r}")


def _chain_from_dict(d: Mapping) -> NestedChain:
    if "sets" in d:
        return explicit_chain(d["sets"])
    return doubling_chain(int(d.get("base", 1)))


def _cost_from_dict(d: Mapping) -> CostModel:
    dollar = _dollar_from_dict(d.get("dollar", {}))
    model = d.get("model", "unrestricted")
    if model == "unrestricted":
        return UnrestrictedModel(dollar)
    if model == "nested":
        return NestedModel(_chain_from_dict(d.get("chain", {})), dollar)
    raise ConfigError(f"unknown cost model {model!r}")


def make_default_test_family(
    kernel: Kernel1D,
    W: WeightFamily,
    size: int = 3,
    rank_cap: int = 8,
    seed: int = 0,
) -> tuple[AnchoredFunction, ...]:
    """Unit-norm surrogates for the unit ball.

    The first function is the truncated, normalized integration
    representer (mean-embedding components over the leading support
    sets); the rest are random signed kernel-translate combinations on
    those sets, each normalized to unit weighted norm.
    """
    support = enumerate_ordered(W, math.inf, rank_cap).entries
    funcs: list[AnchoredFunction] = []

    rep_terms = tuple(
        Term(e.u, e.gamma, tuple(MeanEmbedding() for _ in e.u)) for e in support
    )
    rep = AnchoredFunction(kernel, rep_terms)
    funcs.append(rep.scaled(1.0 / func_norm(rep, W)))

    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(77,)))
    lo, hi = kernel.domain
    while len(funcs) < size:
        picks = rng.choice(len(support), size=min(3, len(support)), replace=False)
        terms = []
        for p in sorted(picks):
            e = support[int(p)]
            ts = lo + (hi - lo) * rng.uniform(0.2, 1.0, size=len(e.u))
            terms.append(
                Term(
                    e.u,
                    float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)),
                    tuple(KernelTranslate(float(t)) for t in ts),
                )
            )
        f = AnchoredFunction(kernel, tuple(terms))
        funcs.append(f.scaled(1.0 / func_norm(f, W)))
    return tuple(funcs)


def config_from_dict(doc: Mapping, base_dir: str = ".") -> ExperimentConfig:
    if int(doc.get("schema", 0)) != SCHEMA_VERSION:
        raise ConfigError(f"config schema must be {SCHEMA_VERSION}")
    kernel = _kernel_from_dict(doc.get("kernel", {}))
    wspec = doc.get("weights")
    if isinstance(wspec, str):
        weights = parse_weight_spec(wspec, c0=kernel.C0)
    elif isinstance(wspec, Mapping):
        weights = weight_family_from_dict(wspec, c0=kernel.C0)
    else:
        raise ConfigError("config needs a weights spec (string or mapping)")
    cost_model = _cost_from_dict(doc.get("cost", {}))

    fam_spec = doc.get("test_family", {"kind": "default"})
    if "functions" in fam_spec:
        funcs = []
        for obj in fam_spec["functions"]:
            if isinstance(obj, str):
                path = Path(base_dir) / obj
                f = function_from_json(path.read_text(), kernel)
            else:
                f = function_from_json(json.dumps(obj), kernel)
            funcs.append(f.scaled(1.0 / func_norm(f, weights)))
        family = tuple(funcs)
    else:
        family = make_default_test_family(
            kernel,
            weights,
            size=int(fam_spec.get("size", 3)),
            rank_cap=int(fam_spec.get("rank_cap", 8)),
            seed=int(doc.get("seed", 0)),
        )

    return ExperimentConfig(
        kernel=kernel,
        weights=weights,
        cost_model=cost_model,
        algorithm=dict(doc.get("algorithm", {"kind": "cd"})),
        test_family=family,
        budgets=tuple(float(b) for b in doc["budgets"]),
        replications=int(doc["replications"]),
        seed=int(doc["seed"]),
        slack=float(doc.get("slack", 0.2)),
        bound_spec=doc.get("bound"),
        output_dir=doc.get("output_dir"),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, Mapping):
        raise ConfigError(f"config file {path} does not contain a mapping")
    return config_from_dict(doc, base_dir=os.path.dirname(path) or ".")


# ---------------------------------------------------------------------------
# Budget-to-plan mapping
# ---------------------------------------------------------------------------


def _runner_for_budget(
    cfg: ExperimentConfig, budget: float
) -> Optional[Callable[[AnchoredFunction, int], QuadratureResult]]:
    """A closure running the configured algorithm within the budget, or
    None when the budget cannot pay for a minimal run."""
    kind = cfg.algorithm["kind"]
    model = cfg.cost_model
    kernel = cfg.kernel

    if kind == "mc":
        v = VariableSet.of(cfg.algorithm.get("active", [1]))
        per = model.cost(v)
        n = int(budget // per) if math.isfinite(per) else 0
        if n < 1:
            return None
        return lambda f, s: mc_quad(
            f, v, n, ProductMeasureSampler(kernel, s), cost_model=model
        )

    if kind == "uni3":
        per = model.cost(VariableSet((1,)))
        n = int(budget // per) if math.isfinite(per) else 0
        n -= n % 2
        if n < 4:
            return None
        return lambda f, s: uni_quad_rate3(f, n, s, kernel=kernel, cost_model=model)

    if kind == "ml":
        if isinstance(model, NestedModel):
            chain = model.chain
        else:
            chain = doubling_chain(int(cfg.algorithm.get("base", 1)))
        n_levels = max(1, math.ceil(math.log2(max(budget, 2))))
        shares = np.array([2.0 ** (-l) for l in range(1, n_levels + 1)])
        shares /= shares.sum()
        levels: list[tuple[VariableSet, int]] = []
        prev: Optional[VariableSet] = None
        for l in range(1, n_levels + 1):
            v = chain.member(l)
            if v is None:
                break
            per = model.cost(v) + (model.cost(prev) if prev is not None else 0.0)
            nl = int((budget * shares[l - 1]) // per)
            if nl < 1:
                break
            levels.append((v, nl))
            prev = v
        if not levels:
            return None
        plan = LevelPlan(tuple(levels))
        return lambda f, s: multilevel_quad(
            f, plan, ProductMeasureSampler(kernel, s), cost_model=model
        )

    # changing dimension
    if not isinstance(model, UnrestrictedModel):
        raise ConfigError("the changing-dimension engine needs the unrestricted model")
    if budget < model.dollar(0):
        return None
    return lambda f, s: cd_quad(
        f, cfg.weights, budget, model.dollar, s, kernel=kernel
    )


# ---------------------------------------------------------------------------
# Runs, fits, verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionStat:
    function_id: int
    rmse: float
    se: float


@dataclass(frozen=True)
class BudgetRow:
    budget: float
    feasible: bool
    realized_cost_mean: float
    per_function: tuple[FunctionStat, ...]
    worst_rmse: float


@dataclass(frozen=True)
class RateFit:
    r: float
    c: float
    residual: float
    excluded: tuple[float, ...]
    n_rows: int


@dataclass(frozen=True)
class BoundVerdict:
    status: str  # PASS | FAIL | VACUOUS
    rate_cap: float
    margin: float


@dataclass(frozen=True)
class ExperimentRun:
    rows: tuple[BudgetRow, ...]
    fit: Optional[RateFit]
    bound: Optional[ExponentBound]
    verdict: Optional[BoundVerdict]
    seed: int


def _cell_seed(master: int, *key: int) -> int:
    ss = np.random.SeedSequence(master, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def _jackknife_se(errors: np.ndarray) -> float:
    R = len(errors)
    if R < 2:
        return 0.0
    ss = float(np.sum(errors**2))
    loo = np.sqrt(np.maximum(ss - errors**2, 0.0) / (R - 1))
    return float(np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))


def run_experiment(cfg: ExperimentConfig) -> ExperimentRun:
    """Budget sweep with R replications per (budget, test function) cell."""
    exact = [func_integral_exact(f) for f in cfg.test_family]
    threads = int(os.environ.get(THREADS_ENV, "1") or "1")

    rows: list[BudgetRow] = []
    for bi, budget in enumerate(cfg.budgets):
        runner = _runner_for_budget(cfg, budget)
        if runner is None:
            rows.append(
                BudgetRow(
                    budget=budget,
                    feasible=False,
                    realized_cost_mean=math.nan,
                    per_function=(),
                    worst_rmse=math.nan,
                )
            )
            continue

        cells = [
            (fi, rep)
            for fi in range(len(cfg.test_family))
            for rep in range(cfg.replications)
        ]

        def _run_cell(cell: tuple[int, int]) -> tuple[float, float]:
            fi, rep = cell
            res = runner(
                cfg.test_family[fi], _cell_seed(cfg.seed, bi, fi, rep)
            )
            return res.estimate - exact[fi], res.ledger.total

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outs = list(pool.map(_run_cell, cells))
        else:
            outs = [_run_cell(c) for c in cells]

        errs = np.array([o[0] for o in outs]).reshape(
            len(cfg.test_family), cfg.replications
        )
        costs = np.array([o[1] for o in outs])
        stats = tuple(
            FunctionStat(
                function_id=fi,
                rmse=float(np.sqrt(np.mean(errs[fi] ** 2))),
                se=_jackknife_se(errs[fi]),
            )
            for fi in range(len(cfg.test_family))
        )
        rows.append(
            BudgetRow(
                budget=budget,
                feasible=True,
                realized_cost_mean=float(np.mean(costs)),
                per_function=stats,
                worst_rmse=max(s.rmse for s in stats),
            )
        )

    fit = None
    bound = None
    verdict = None
    valid = [r for r in rows if r.feasible and r.worst_rmse > 0.0]
    if len(valid) >= 4:
        fit = fit_rate(rows)
        bound = _bound_for(cfg)
        if bound is not None:
            verdict = compare_with_bounds(fit, bound, cfg.slack)
    return ExperimentRun(
        rows=tuple(rows), fit=fit, bound=bound, verdict=verdict, seed=cfg.seed
    )


def _bound_for(cfg: ExperimentConfig) -> Optional[ExponentBound]:
    spec = dict(cfg.bound_spec or {})
    model = spec.get(
        "model",
        "nest_ran" if isinstance(cfg.cost_model, NestedModel) else "unr_res",
    )
    dollar = cfg.cost_model.dollar
    default_s = dollar.s if dollar.kind == "poly" else 1.0
    sigmas = spec.get("sigmas", list(range(1, 7)))
    if isinstance(sigmas, str):
        lo, hi = sigmas.split("..")
        sigmas = list(range(int(lo), int(hi) + 1))
    return exponent_lower_bound(
        model=model,
        alpha=float(spec.get("alpha", 3.0)),
        s=float(spec.get("s", default_s)),
        W=cfg.weights,
        sigmas=sigmas,
    )


def fit_rate(rows: Sequence[BudgetRow]) -> RateFit:
    """Least squares of log worst RMSE against log budget.

    Zero-RMSE rows cannot enter the log fit and are excluded (recorded in
    the report); at least 4 usable rows are required.
    """
    usable = [r for r in rows if r.feasible and r.worst_rmse > 0.0]
    excluded = tuple(
        r.budget for r in rows if r.feasible and r.worst_rmse == 0.0
    )
    if len(usable) < 4:
        raise ParameterError(
            f"rate fitting needs >= 4 rows with positive error, got {len(usable)}"
        )
    x = np.log([r.budget for r in usable])
    y = np.log([r.worst_rmse for r in usable])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fittedvals = A @ coef
    resid = float(np.sqrt(np.mean((y - fittedvals) ** 2)))
    return RateFit(
        r=float(-coef[0]),
        c=float(np.exp(coef[1])),
        residual=resid,
        excluded=excluded,
        n_rows=len(usable),
    )


def compare_with_bounds(
    fit: RateFit, bound: ExponentBound, slack: float = 0.2
) -> BoundVerdict:
    """No algorithm may converge faster than the exponent bound allows.

    PASS when the fitted rate is at most 1/bound + slack; a FAIL flags a
    measurement or implementation defect.  An infinite bound (necessary
    decay condition violated) makes the comparison vacuous.
    """
    if not math.isfinite(bound.bound) or bound.bound <= 0:
        return BoundVerdict(status="VACUOUS", rate_cap=math.nan, margin=math.nan)
    cap = 1.0 / bound.bound
    margin = cap - fit.r
    status = "PASS" if fit.r <= cap + slack else "FAIL"
    return BoundVerdict(status=status, rate_cap=cap, margin=margin)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def runs_csv(run: ExperimentRun) -> str:
    lines = ["budget,realized_cost_mean,function_id,rmse,se"]
    for row in run.rows:
        if not row.feasible:
            lines.append(f"{row.budget!r},inf,,skipped,")
            continue
        for st in row.per_function:
            lines.append(
                f"{row.budget!r},{row.realized_cost_mean!r},"
                f"{st.function_id},{st.rmse!r},{st.se!r}"
            )
    return "\n".join(lines) + "\n"


def plotdata_csv(run: ExperimentRun) -> str:
    lines = ["log_budget,log_worst_rmse"]
    for row in run.rows:
        if row.feasible and row.worst_rmse > 0.0:
            lines.append(f"{math.log(row.budget)!r},{math.log(row.worst_rmse)!r}")
    return "\n".join(lines) + "\n"


def summary_dict(run: ExperimentRun, cfg: Optional[ExperimentConfig] = None) -> dict:
    out: dict = {"schema": SCHEMA_VERSION, "seed": run.seed}
    if cfg is not None:
        out["algorithm"] = dict(cfg.algorithm)
        out["weights"] = weight_family_to_dict(cfg.weights)
        out["replications"] = cfg.replications
    if run.fit is not None:
        out["fit"] = {
            "rate": run.fit.r,
            "constant": run.fit.c,
            "residual": run.fit.residual,
            "excluded_budgets": list(run.fit.excluded),
        }
    if run.bound is not None:
        out["bound"] = {
            "model": run.bound.model,
            "value": run.bound.bound,
            "necessary_condition_ok": run.bound.necessary_condition_ok,
        }
    if run.verdict is not None:
        out["verdict"] = {
            "status": run.verdict.status,
            "rate_cap": run.verdict.rate_cap,
            "margin": run.verdict.margin,
        }
    return out


def write_outputs(
    run: ExperimentRun, out_dir: str, cfg: Optional[ExperimentConfig] = None
) -> dict[str, str]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "runs": str(d / "runs.csv"),
        "summary": str(d / "summary.json"),
        "plotdata": str(d / "plotdata.csv"),
    }
    (d / "runs.csv").write_text(runs_csv(run))
    (d / "summary.json").write_text(
        json.dumps(summary_dict(run, cfg), indent=2, sort_keys=True) + "\n"
    )
    (d / "plotdata.csv").write_text(plotdata_csv(run))
    return paths
