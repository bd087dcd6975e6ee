"""Command-line interface.

Subcommands: constants | weights | bounds | integrate | experiment | fool.
JSON goes to stdout; CSV goes to stdout or --out.  Exit codes: 0 success,
2 validation error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from typing import Optional

import numpy as np

from .bounds import (
    CoverFamily,
    b_squared,
    exponent_lower_bound,
    fooling_experiment,
    pw11_upper_bound,
)
from .costs import (
    DollarFunction,
    NestedModel,
    UnrestrictedModel,
    doubling_chain,
    explicit_chain,
    poly_dollar,
    exp_dollar,
    table_dollar,
)
from .errors import AnchorQuadError
from .harness import load_config, run_experiment, summary_dict, write_outputs
from .quadrature import cd_quad, mc_quad, multilevel_quad, uni_quad_rate3, LevelPlan
from .rkhs import (
    ProductMeasureSampler,
    function_from_json,
    tabulated_kernel,
    wiener_kernel,
)
from .sets import VariableSet, parse_variable_set
from .weights import enumerate_ordered, parse_weight_spec
from .errors import ConfigError


def _kernel_from_args(name: str, grid: int) -> object:
    if name == "wiener":
        return wiener_kernel()
    if name == "wiener-tabulated":
        base = wiener_kernel()
        return tabulated_kernel(base.kernel_fn, base.domain, base.anchor, grid)
    raise ConfigError(f"unknown kernel {name!r}")


def _parse_cover(text: str) -> CoverFamily:
    return CoverFamily(
        tuple(parse_variable_set(part) for part in text.split(";"))
    )


def _parse_sigmas(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in text.split(",")]


def _parse_dollar(text: str) -> DollarFunction:
    toks = text.split(":")
    if toks[0] == "poly":
        return poly_dollar(float(toks[1]) if len(toks) > 1 else 1.0)
    if toks[0] == "exp":
        return exp_dollar(float(toks[1]) if len(toks) > 1 else 0.0)
    if toks[0] == "table":
        return table_dollar(float(x) for x in toks[1].split(","))
    raise ConfigError(f"unknown dollar spec {text!r}")


def _emit_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, VariableSet):
        return str(x)
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anchorquad")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", help="kernel constants M and C0")
    c.add_argument("--kernel", default="wiener")
    c.add_argument("--grid", type=int, default=2**14 + 1)

    w = sub.add_parser("weights", help="weight-family diagnostics")
    wsub = w.add_subparsers(dest="weights_command", required=True)
    we = wsub.add_parser("enumerate", help="ordered support as CSV")
    we.add_argument("--weights", required=True)
    we.add_argument("--sigma", default="inf")
    we.add_argument("--count", type=int, required=True)
    we.add_argument("--kernel", default="wiener")
    we.add_argument("--out")

    b = sub.add_parser("bounds", help="projection error and exponent bounds")
    bsub = b.add_subparsers(dest="bounds_command", required=True)
    bq = bsub.add_parser("bsq", help="uncovered hat-weight mass")
    bq.add_argument("--weights", required=True)
    bq.add_argument("--cover", required=True)
    bq.add_argument("--kernel", default="wiener")
    bq.add_argument("--tail-tol", type=float, default=1e-10)
    be = bsub.add_parser("exponent", help="tractability-exponent lower bound")
    be.add_argument("--model", required=True,
                    choices=["nest-ran", "unr-res", "unr-res-omega"])
    be.add_argument("--alpha", type=float, required=True)
    be.add_argument("--s", type=float, required=True)
    be.add_argument("--weights", required=True)
    be.add_argument("--sigmas", default="1..6")
    be.add_argument("--kernel", default="wiener")
    be.add_argument("--kappa", type=float,
                    help="also report the changing-dimension upper bound")

    i = sub.add_parser("integrate", help="run a quadrature engine")
    i.add_argument("--algo", required=True, choices=["mc", "uni3", "ml", "cd"])
    i.add_argument("--weights", required=True)
    i.add_argument("--function", required=True, help="integrand JSON file")
    i.add_argument("--budget", type=float, required=True)
    i.add_argument("--model", default="unrestricted",
                   choices=["unrestricted", "nested"])
    i.add_argument("--dollar", default="poly:1")
    i.add_argument("--chain", default="base:1",
                   help="base:D or explicit sets '1;1,2;1,2,3'")
    i.add_argument("--active", default="1", help="sample set for --algo mc")
    i.add_argument("--seed", type=int, required=True)
    i.add_argument("--reps", type=int, default=1)
    i.add_argument("--kernel", default="wiener")
    i.add_argument("--out", help="CSV summary path")

    e = sub.add_parser("experiment", help="run a configured budget sweep")
    e.add_argument("--config", required=True)
    e.add_argument("--out", help="output directory (overrides config)")

    fl = sub.add_parser("fool", help="fooling-pair experiment")
    fl.add_argument("--weights", required=True)
    fl.add_argument("--cover", required=True)
    fl.add_argument("--reps", type=int, default=200)
    fl.add_argument("--seed", type=int, required=True)
    fl.add_argument("--budget", type=int, default=100)
    fl.add_argument("--kernel", default="wiener")
    return p


def _cmd_constants(args) -> int:
    k = _kernel_from_args(args.kernel, args.grid)
    _emit_json({"M": k.M, "C0": k.C0})
    return 0


def _cmd_weights(args) -> int:
    kernel = _kernel_from_args(args.kernel, 2**14 + 1)
    W = parse_weight_spec(args.weights, c0=kernel.C0)
    sigma = math.inf if args.sigma in ("inf", "INF") else int(args.sigma)
    sup = enumerate_ordered(W, sigma, args.count)
    lines = ["rank,set,gamma,gamma_hat"]
    for entry in sup.entries:
        lines.append(f"{entry.rank},\"{entry.u}\",{entry.gamma!r},{entry.gamma_hat!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_bounds(args) -> int:
    kernel = _kernel_from_args(args.kernel, 2**14 + 1)
    W = parse_weight_spec(args.weights, c0=kernel.C0)
    if args.bounds_command == "bsq":
        rep = b_squared(W, _parse_cover(args.cover), tail_tol=args.tail_tol)
        _emit_json(
            {
                "value": rep.value,
                "covered_mass": rep.covered_mass,
                "total_mass": rep.total_mass,
                "tail_bound": rep.tail_bound,
                "truncation_rank": rep.truncation_rank,
            }
        )
        return 0
    model = args.model.replace("-", "_")
    bound = exponent_lower_bound(
        model, args.alpha, args.s, W, _parse_sigmas(args.sigmas)
    )
    out = {
        "model": bound.model,
        "alpha": bound.alpha,
        "s": bound.s,
        "bound": _jsonable(bound.bound),
        "necessary_condition_ok": bound.necessary_condition_ok,
        "per_sigma": [
            {
                "sigma": t.sigma,
                "decay": _jsonable(t.decay),
                "tstar": t.tstar,
                "term": _jsonable(t.term),
            }
            for t in bound.per_sigma
        ],
    }
    if args.kappa is not None:
        out["pw11_upper_bound"] = _jsonable(pw11_upper_bound(args.kappa, W))
    _emit_json(out)
    return 0


def _cost_model_from_args(args):
    dollar = _parse_dollar(args.dollar)
    if args.model == "unrestricted":
        return UnrestrictedModel(dollar)
    if args.chain.startswith("base:"):
        chain = doubling_chain(int(args.chain.split(":")[1]))
    else:
        chain = explicit_chain(
            [parse_variable_set(part).indices for part in args.chain.split(";")]
        )
    return NestedModel(chain, dollar)


def _cmd_integrate(args) -> int:
    kernel = _kernel_from_args(args.kernel, 2**14 + 1)
    W = parse_weight_spec(args.weights, c0=kernel.C0)
    with open(args.function) as fh:
        f = function_from_json(fh.read(), kernel)
    model = _cost_model_from_args(args)

    results = []
    for rep in range(args.reps):
        seed = args.seed + rep
        if args.algo == "mc":
            v = parse_variable_set(args.active)
            per = model.cost(v)
            n = max(1, int(args.budget // per))
            res = mc_quad(f, v, n, ProductMeasureSampler(kernel, seed), model)
        elif args.algo == "uni3":
            per = model.cost(VariableSet((1,)))
            n = max(4, int(args.budget // per) & ~1)
            res = uni_quad_rate3(f, n, seed, kernel=kernel, cost_model=model)
        elif args.algo == "ml":
            chain = model.chain if isinstance(model, NestedModel) else doubling_chain(1)
            levels = []
            prev_cost = 0.0
            l, left = 1, args.budget
            while True:
                v = chain.member(l)
                if v is None:
                    break
                per = model.cost(v) + prev_cost
                nl = int((left / 2) // per)
                if nl < 1:
                    break
                levels.append((v, nl))
                left -= nl * per
                prev_cost = model.cost(v)
                l += 1
            if not levels:
                raise ConfigError("budget too small for one multilevel sample")
            res = multilevel_quad(
                f, LevelPlan(tuple(levels)), ProductMeasureSampler(kernel, seed), model
            )
        else:
            if not isinstance(model, UnrestrictedModel):
                raise ConfigError("cd needs --model unrestricted")
            res = cd_quad(f, W, args.budget, model.dollar, seed, kernel=kernel)
        results.append(res)

    _emit_json(
        [
            {
                "estimate": r.estimate,
                "cost": r.ledger.total,
                "n_evals": r.n_evals,
                "seed": r.seed,
            }
            for r in results
        ]
    )
    if args.out:
        lines = ["rep,estimate,cost,n_evals,seed"]
        for idx, r in enumerate(results):
            lines.append(f"{idx},{r.estimate!r},{r.ledger.total!r},{r.n_evals},{r.seed}")
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    run = run_experiment(cfg)
    out_dir = args.out or cfg.output_dir
    if out_dir:
        write_outputs(run, out_dir, cfg)
    _emit_json(summary_dict(run, cfg))
    return 0


def _cmd_fool(args) -> int:
    kernel = _kernel_from_args(args.kernel, 2**14 + 1)
    W = parse_weight_spec(args.weights, c0=kernel.C0)
    cover = _parse_cover(args.cover)
    v0 = cover.sets[0]

    def algo(f, seed):
        return mc_quad(f, v0, args.budget, ProductMeasureSampler(kernel, seed))

    rep = fooling_experiment(
        algo, W, cover, replications=args.reps, seed=args.seed, kernel=kernel
    )
    _emit_json(
        {
            "empirical_rmse": rep.empirical_rmse,
            "b": rep.b_value,
            "achieved": rep.achieved,
            "replications": rep.replications,
            "class": rep.certificate_class,
        }
    )
    return 0


def cli_dispatch(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2
    try:
        if args.command == "constants":
            return _cmd_constants(args)
        if args.command == "weights":
            return _cmd_weights(args)
        if args.command == "bounds":
            return _cmd_bounds(args)
        if args.command == "integrate":
            return _cmd_integrate(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        if args.command == "fool":
            return _cmd_fool(args)
        parser.print_usage(sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AnchorQuadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_dispatch())
