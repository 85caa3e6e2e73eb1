"""Command-line front door: market generation, single runs, edge-set tools,
and named experiment suites.

Flag precedence is CLI over environment (MATCHLAB_SEED) over drawn
defaults; the effective configuration, seed included, is echoed into every
artifact so runs can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import secrets
import sys
from pathlib import Path

from .analysis import (
    InterviewParams,
    SelectedSetParams,
    acceptable_edges,
    interview_edges,
    loss_params_from_bound,
    loss_report,
    selected_edges,
    theoretical_loss_params,
    truncated_edges,
    viable_edges,
)
from .engine import EdgeSet, run_da, verify_stability
from .experiments import ExperimentConfig, EXPERIMENTS, decile_labels, run_experiment
from .market import LEFT, RIGHT, generate_market, linear_model, load_market, save_market

EDGE_KINDS = ("full", "acceptable", "viable", "interview", "selected", "truncated")


def _range_checked(kind, lo, hi, name):
    def parse(text: str):
        value = kind(text)
        if not lo <= value <= hi:
            raise argparse.ArgumentTypeError(f"{name} must be in [{lo}, {hi}], got {value}")
        return value

    return parse


_unit_float = _range_checked(float, 0.0, 1.0, "value")
_weight = _range_checked(float, 1e-9, 1.0 - 1e-9, "lambda")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _resolve_seed(args) -> tuple[int, bool]:
    """Seed from --seed, else MATCHLAB_SEED, else a fresh random one."""
    if args.seed is not None:
        return args.seed, False
    env = os.environ.get("MATCHLAB_SEED")
    if env is not None:
        try:
            return int(env), False
        except ValueError:
            raise SystemExit(f"MATCHLAB_SEED must be an integer, got {env!r}")
    return secrets.randbits(63), True


def _add_market_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=_positive_int, help="agents per side (balanced market), >= 1")
    p.add_argument("--n-left", "--nw", dest="n_left", type=_positive_int,
                   help="proposing-side agents (workers), >= 1")
    p.add_argument("--n-right", "--nc", dest="n_right", type=_positive_int,
                   help="receiving-side agents (companies), >= 1")
    p.add_argument("--cap-left", type=_positive_int, default=1, help="per-agent capacity, left side, >= 1")
    p.add_argument("--d", "--cap-right", dest="cap_right", type=_positive_int, default=1,
                   help="per-agent capacity, right side (company positions), >= 1")
    p.add_argument("--lambda", dest="weight", type=_weight, default=0.8,
                   help="rating weight of the linear utility model, in (0, 1)")
    p.add_argument("--rating-ranges", choices=("auto", "unit", "scaled"), default="auto",
                   help="rating ranges for unbalanced markets")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="base seed (64-bit); defaults to MATCHLAB_SEED, else drawn and echoed")
    p.add_argument("--out", type=Path, default=None, help="output path (file or directory)")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="row output format; JSON summaries are always written")
    p.add_argument("--jobs", type=_positive_int, default=1, help="concurrent runs, >= 1")


def _add_edge_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", choices=EDGE_KINDS, default="full", help="edge-set construction")
    p.add_argument("--L", dest="loss_cap", type=_unit_float, default=None,
                   help="loss cap for acceptable edges, both sides, in [0, 1]")
    p.add_argument("--L-left", dest="loss_cap_left", type=_unit_float, default=None,
                   help="left-side loss cap, in [0, 1]")
    p.add_argument("--L-right", dest="loss_cap_right", type=_unit_float, default=None,
                   help="right-side loss cap, in [0, 1]")
    p.add_argument("--sigma", dest="sigma", type=_unit_float, default=0.0,
                   help="bottom-zone rating width for acceptable edges, in [0, 1]")
    p.add_argument("--p", dest="rating_window", type=_unit_float, default=0.19,
                   help="interview rating window, in [0, 1]")
    p.add_argument("--q", dest="score_cutoff", type=_unit_float, default=0.60,
                   help="interview private-score cutoff, in [0, 1]")
    p.add_argument("--k", dest="expected_degree", type=_range_checked(float, 1.0, 1e9, "k"),
                   default=15.0, help="selected-set expected interviews per agent, >= 1")
    p.add_argument("--t-left", type=_range_checked(float, 1.0, 1e9, "t"), default=1.0,
                   help="left-side truncation relaxation, >= 1")
    p.add_argument("--t-right", type=_range_checked(float, 1.0, 1e9, "t"), default=1.0,
                   help="right-side truncation relaxation, >= 1")
    p.add_argument("--c", dest="failure_exponent", type=_range_checked(float, 0.0, 100.0, "c"),
                   default=1.0, help="failure-probability exponent for derived thresholds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchlab",
        description="Stable-matching market laboratory: generate markets, run "
                    "deferred acceptance, build edge sets, and reproduce the "
                    "simulation suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate and save a market")
    _add_market_flags(g)
    _add_common_flags(g)

    r = sub.add_parser("run", help="run deferred acceptance on a market")
    r.add_argument("--market", type=Path, default=None, help="market file from `generate`")
    _add_market_flags(r)
    r.add_argument("--propose-side", choices=(LEFT, RIGHT), default=LEFT)
    _add_edge_flags(r)
    _add_common_flags(r)

    e = sub.add_parser("edges", help="build an edge set and export it")
    e.add_argument("--market", type=Path, default=None, help="market file from `generate`")
    _add_market_flags(e)
    _add_edge_flags(e)
    _add_common_flags(e)

    x = sub.add_parser("experiment", help="run a named experiment suite")
    x.add_argument("experiment", choices=sorted(EXPERIMENTS), help="experiment id")
    _add_market_flags(x)
    x.add_argument("--runs", type=_positive_int, default=20, help="Monte Carlo runs, >= 1")
    x.add_argument("--propose-side", choices=(LEFT, RIGHT), default=LEFT)
    _add_edge_flags(x)
    x.add_argument("--grid-start", type=_unit_float, default=0.01)
    x.add_argument("--grid-stop", type=_unit_float, default=0.50)
    x.add_argument("--grid-step", type=_range_checked(float, 1e-6, 1.0, "grid step"), default=0.01)
    x.add_argument("--sigma-rule", choices=("theory", "fixed"), default="theory",
                   help="bottom-zone rule for the min-L search")
    x.add_argument("--n-values", type=_positive_int, nargs="+", default=[500, 4000],
                   help="market sizes for loss scaling")
    x.add_argument("--exceedance-n", type=_positive_int, default=2000)
    x.add_argument("--nu", type=_range_checked(float, 1e-6, 1.0, "nu"), default=0.5,
                   help="receiver bottom-zone constant (truncation), in (0, 1]")
    x.add_argument("--eta", type=_range_checked(float, 1.0, 100.0, "eta"), default=2.0,
                   help="proposer bottom-zone constant (truncation), >= 1")
    x.add_argument("--loss-bound", type=_unit_float, default=None,
                   help="override the theoretical loss bound (truncation)")
    _add_common_flags(x)

    return parser


def _market_sides(args) -> tuple[int, int]:
    n_left = args.n_left if args.n_left is not None else args.n
    n_right = args.n_right if args.n_right is not None else args.n
    if n_left is None or n_right is None:
        raise SystemExit("market size missing: pass --n, or --n-left/--nw and --n-right/--nc")
    return n_left, n_right


def _market_from_args(args, seed: int):
    if getattr(args, "market", None) is not None:
        return load_market(args.market)
    n_left, n_right = _market_sides(args)
    return generate_market(
        n_left,
        n_right,
        args.cap_left,
        args.cap_right,
        model=linear_model(args.weight),
        seed=seed,
        rating_ranges=args.rating_ranges,
    )


def _build_edges(market, args, seed: int):
    kind = args.edges
    if kind == "full":
        return None
    if kind == "acceptable":
        cap_l = args.loss_cap_left if args.loss_cap_left is not None else args.loss_cap
        cap_r = args.loss_cap_right if args.loss_cap_right is not None else args.loss_cap
        if cap_l is None or cap_r is None:
            raise SystemExit("acceptable edges need --L (or --L-left/--L-right)")
        return acceptable_edges(market, cap_l, cap_r, args.sigma, args.sigma)
    if kind == "viable":
        return viable_edges(market)
    if kind == "interview":
        return interview_edges(market, InterviewParams(args.rating_window, args.score_cutoff))
    if kind == "selected":
        return selected_edges(market, SelectedSetParams(args.expected_degree))
    if kind == "truncated":
        if args.loss_cap is not None:
            params = loss_params_from_bound(args.loss_cap, market.model, args.failure_exponent)
        else:
            params = theoretical_loss_params(market.n_left, args.failure_exponent, market.model)
        return truncated_edges(market, params, args.t_left, args.t_right)
    raise SystemExit(f"unknown edge kind {kind!r}")


def _write_rows(rows: list[dict], path: Path, fmt: str) -> None:
    if fmt == "json":
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, restval="")
        writer.writeheader()
        writer.writerows(rows)


def _matching_rows(market, matching) -> list[dict]:
    rows = []
    for side in (LEFT, RIGHT):
        rank = market.agent_rank(side)
        proposing = side == matching.proposing_side
        for a, partners in enumerate(matching.matches(side)):
            rows.append({
                "side": side,
                "agent_index": a,
                "public_rank": int(rank[a]),
                "partner_indices": ";".join(str(p) for p in partners),
                "proposals_made": int(matching.proposal_counts[a]) if proposing else 0,
                "matched_flag": int(bool(partners)),
            })
    return rows


def _out_dir(args, default: str) -> Path:
    out = args.out if args.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    seed, drawn = _resolve_seed(args)
    n_left, n_right = _market_sides(args)
    market = generate_market(
        n_left,
        n_right,
        args.cap_left,
        args.cap_right,
        model=linear_model(args.weight),
        seed=seed,
        rating_ranges=args.rating_ranges,
    )
    out = args.out if args.out is not None else Path("market.npz")
    save_market(market, out)
    meta = {
        "seed": seed,
        "seed_drawn": drawn,
        "n_left": n_left,
        "n_right": n_right,
        "cap_left": args.cap_left,
        "cap_right": args.cap_right,
        "lambda": args.weight,
        "capacity_balanced": market.capacity_balanced,
        "out": str(out),
    }
    print(json.dumps(meta, sort_keys=True))
    return 0


def cmd_run(args) -> int:
    seed, drawn = _resolve_seed(args)
    market = _market_from_args(args, seed)
    edges = _build_edges(market, args, seed)
    matching = run_da(market, args.propose_side, edges)
    blocking = verify_stability(market, edges, matching)
    params = None
    if args.loss_cap is not None:
        params = loss_params_from_bound(args.loss_cap, market.model, args.failure_exponent)
    report = loss_report(market, matching, params)

    out = _out_dir(args, "run-out")
    _write_rows(_matching_rows(market, matching), out / "matching", args.format)
    _write_rows(report.rows(market), out / "losses", args.format)
    audit = {
        "seed": seed,
        "seed_drawn": drawn,
        "propose_side": args.propose_side,
        "edge_kind": args.edges,
        "edge_count": None if edges is None else edges.edge_count,
        "blocking_pairs": len(blocking),
        "matched_left": int(matching.matched_mask(LEFT).sum()),
        "matched_right": int(matching.matched_mask(RIGHT).sum()),
        "capacity_balanced": market.capacity_balanced,
    }
    with open(out / "audit.json", "w") as fh:
        json.dump(audit, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"blocking_pairs": len(blocking), "out": str(out)}, sort_keys=True))
    return 0 if not blocking else 1


def cmd_edges(args) -> int:
    seed, drawn = _resolve_seed(args)
    market = _market_from_args(args, seed)
    edges = _build_edges(market, args, seed)
    if edges is None:
        edges = EdgeSet.full(market.n_left, market.n_right)
    out = _out_dir(args, "edges-out")
    rows = [{"left_index": int(i), "right_index": int(j)} for i, j in edges.pairs()]
    _write_rows(rows, out / "edges", args.format)

    summary = {"seed": seed, "seed_drawn": drawn, "edge_kind": args.edges,
               "edge_count": edges.edge_count, "degrees_by_decile": {}}
    for side in (LEFT, RIGHT):
        deg = edges.degrees(side).astype(float)
        dec = decile_labels(market.n(side))[market.agent_rank(side)]
        summary["degrees_by_decile"][side] = [
            float(deg[dec == d].mean()) if (dec == d).any() else float("nan") for d in range(10)
        ]
    with open(out / "edge_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"edge_count": edges.edge_count, "out": str(out)}, sort_keys=True))
    return 0


def cmd_experiment(args) -> int:
    seed, drawn = _resolve_seed(args)
    n_left, n_right = (args.n_left if args.n_left is not None else args.n,
                       args.n_right if args.n_right is not None else args.n)
    if n_left is None:
        raise SystemExit("experiments need a market size: pass --n or --n-left/--nw")
    loss_cap_left = args.loss_cap_left if args.loss_cap_left is not None else args.loss_cap
    loss_cap_right = args.loss_cap_right if args.loss_cap_right is not None else args.loss_cap
    config = ExperimentConfig(
        experiment=args.experiment,
        n_left=n_left,
        n_right=n_right,
        cap_left=args.cap_left,
        cap_right=args.cap_right,
        weight=args.weight,
        runs=args.runs,
        seed=seed,
        jobs=args.jobs,
        proposing_side=args.propose_side,
        rating_ranges=args.rating_ranges,
        loss_cap_left=loss_cap_left,
        loss_cap_right=loss_cap_right,
        sigma_left=args.sigma,
        sigma_right=args.sigma,
        sigma_rule=args.sigma_rule,
        grid_start=args.grid_start,
        grid_stop=args.grid_stop,
        grid_step=args.grid_step,
        rating_window=args.rating_window,
        score_cutoff=args.score_cutoff,
        n_values=tuple(args.n_values),
        exceedance_n=args.exceedance_n,
        failure_exponent=args.failure_exponent,
        nu=args.nu,
        eta=args.eta,
        loss_bound=args.loss_bound,
        expected_degree=args.expected_degree,
    )
    report = run_experiment(config)
    report.config["seed_drawn"] = drawn
    out = _out_dir(args, f"experiment-{args.experiment}")
    if args.format == "csv":
        report.write_csv(out / "report.csv")
    else:
        with open(out / "report.json", "w") as fh:
            json.dump(report.rows, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    report.write_json(out / "summary.json")
    audits_ok = report.summary.get("blocking_pairs_total", 0) == 0
    print(json.dumps({"experiment": args.experiment, "out": str(out),
                      "audits_ok": audits_ok,
                      "summary_keys": sorted(report.summary)}, sort_keys=True))
    return 0 if audits_ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "edges":
            return cmd_edges(args)
        if args.command == "experiment":
            return cmd_experiment(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parser.error("unknown command")
    return 2


if __name__ == "__main__":
    sys.exit(main())
