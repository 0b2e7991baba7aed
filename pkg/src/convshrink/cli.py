"""Command-line surface: describe, compress, simulate, compare.

Exit codes: 0 success, 2 validation failure, 3 infeasible one-shot
compression, 4 I/O error. All randomness flows from explicit seed flags;
``--no-timestamp`` strips timestamps and wall times so reruns are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import context as ctx
from .arch import count_network, load_network
from .costmodel import load_device
from .errors import ConvShrinkError, SearchSpaceTooLargeError, SpecValidationError
from .operators import OperatorGroup, default_catalog, make_catalog
from .operators import CompressionOperator
from .oracle import load_profile, synthetic_profile, validate_profile
from .search import (
    DEFAULT_EXHAUSTIVE_CAP,
    MutationConfig,
    SearchBudget,
    exhaustive_search,
    greedy_search,
    runtime3c,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_catalog_file(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    records = doc if isinstance(doc, list) else doc["groups"]
    groups = []
    for record in records:
        members = tuple(
            CompressionOperator(kind=m["kind"], **m.get("hyperparams", {}))
            for m in record["members"]
        )
        if not members:
            continue  # identity rows are implied
        groups.append(OperatorGroup(id=int(record["id"]), label=str(record["label"]),
                                    members=members))
    return make_catalog(sorted(groups, key=lambda g: g.id))


def _resolve_inputs(args):
    backbone = load_network(args.backbone)
    device = load_device(args.device)
    catalog = _load_catalog_file(args.catalog) if args.catalog else default_catalog()
    if args.profile:
        profile = load_profile(args.profile)
    elif args.synthetic_seed is not None:
        profile = synthetic_profile(backbone, catalog, seed=args.synthetic_seed)
    else:
        raise SpecValidationError("supply --profile or --synthetic-seed")
    bad = validate_profile(profile, backbone, catalog)
    if bad:
        raise SpecValidationError(bad)
    return backbone, device, catalog, profile


def _static_context(args, device) -> ctx.ContextState:
    s_budget = args.s_budget if args.s_budget is not None else device.cache_capacity
    lambda1, lambda2 = ctx.weights_from_battery(args.battery)
    state = ctx.ContextState(
        time=0.0,
        battery_remaining=args.battery,
        cache_available=max(s_budget, device.cache_capacity),
        inference_count=0,
        a_threshold=args.a_threshold,
        t_budget=args.t_budget,
        s_budget=s_budget,
        lambda1=lambda1,
        lambda2=lambda2,
    )
    bad = state.validate()
    if bad:
        raise SpecValidationError(bad)
    return state


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _result_document(result, args) -> dict:
    doc = result.to_dict(include_wall_time=not args.no_timestamp)
    if not args.no_timestamp:
        doc["generated_at"] = datetime.now(timezone.utc).isoformat()
    return doc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_describe(args) -> int:
    net = load_network(args.backbone)
    cost = count_network(net)
    header = f"{'idx':>3} {'kind':<20} {'in':>5} {'out':>5} {'k':>2} {'spat':>4} " \
             f"{'macs':>12} {'params':>10} {'acts':>9}"
    print(f"network: {net.name}  (base accuracy {net.base_accuracy:.4f})")
    print(header)
    for layer, (macs, params, acts) in zip(net.layers, cost.per_layer):
        print(f"{layer.index:>3} {layer.kind:<20} {layer.in_channels:>5} "
              f"{layer.out_channels:>5} {layer.kernel:>2} {layer.out_spatial:>4} "
              f"{macs:>12} {params:>10} {acts:>9}")
    print(f"totals: macs={cost.macs} params={cost.params} activations={cost.activations}")
    print(f"intensities: C/S_p={cost.macs / cost.params:.4f} "
          f"C/S_a={cost.macs / cost.activations:.4f}")
    return EXIT_OK


def cmd_compress(args) -> int:
    backbone, device, catalog, profile = _resolve_inputs(args)
    state = _static_context(args, device)
    budget = SearchBudget(start_layer=args.start_layer)
    mutation = MutationConfig(seed=args.seed)
    if args.optimizer == "runtime3c":
        result = runtime3c(backbone, catalog, profile, device, state,
                           budget=budget, mutation=mutation)
    elif args.optimizer == "greedy":
        result = greedy_search(backbone, catalog, profile, device, state)
    else:
        result = exhaustive_search(backbone, catalog, profile, device, state,
                                   cap=args.exhaustive_cap)
    doc = _result_document(result, args)
    _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    r = result.report
    wall_ms = 0.0 if args.no_timestamp else result.wall_time_seconds * 1e3
    print(f"encoding={result.encoding} feasible={result.feasible} "
          f"A={r.accuracy:.4f} T={r.latency * 1e3:.3f}ms E={r.energy_proxy:.2f} "
          f"evaluations={result.evaluations} wall={wall_ms:.3f}ms")
    if not result.feasible:
        print(f"violated: {', '.join(result.violated)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _parse_trigger(text: str) -> ctx.TriggerPolicy:
    parts = text.split(":")
    try:
        if parts[0] == ctx.PERIODIC and len(parts) == 2:
            return ctx.TriggerPolicy(mode=ctx.PERIODIC, period=float(parts[1]))
        if parts[0] == ctx.ON_CHANGE and len(parts) == 2:
            return ctx.TriggerPolicy(mode=ctx.ON_CHANGE, change_epsilon=float(parts[1]))
        if parts[0] == ctx.BOTH and len(parts) == 3:
            return ctx.TriggerPolicy(mode=ctx.BOTH, period=float(parts[1]),
                                     change_epsilon=float(parts[2]))
    except ValueError as exc:
        raise SpecValidationError(f"bad trigger spec {text!r}: {exc}") from exc
    raise SpecValidationError(
        f"bad trigger spec {text!r}; use periodic:<s>, on_change:<eps>, or both:<s>:<eps>"
    )


def cmd_simulate(args) -> int:
    backbone, device, catalog, profile = _resolve_inputs(args)
    app = ctx.AppConfig(a_threshold=args.a_threshold, t_budget=args.t_budget)
    trace = ctx.load_trace(args.trace, app)
    policy = _parse_trigger(args.trigger)
    events = ctx.simulate(backbone, catalog, profile, device, trace, policy,
                          budget=SearchBudget(start_layer=args.start_layer),
                          mutation=MutationConfig(seed=args.seed))
    _write_text(args.out, ctx.events_to_jsonl(events, include_wall_time=not args.no_timestamp))
    for e in events:
        r = e.result.report
        print(f"t={e.t:g} feasible={e.result.feasible} encoding={e.result.encoding} "
              f"A={r.accuracy:.4f} T={r.latency * 1e3:.3f}ms S={r.memory_bytes:.0f}B "
              f"E={r.energy_proxy:.2f}")
    print(f"{len(events)} adaptation events written to {args.out}")
    return EXIT_OK


COMPARE_COLUMNS = ["optimizer", "status", "A", "A_loss", "T", "CSp_ratio",
                   "CSa_ratio", "E", "evaluations", "wall_time_seconds"]


def cmd_compare(args) -> int:
    backbone, device, catalog, profile = _resolve_inputs(args)
    state = _static_context(args, device)
    rows = []
    runners = [
        ("runtime3c", lambda: runtime3c(
            backbone, catalog, profile, device, state,
            budget=SearchBudget(start_layer=args.start_layer),
            mutation=MutationConfig(seed=args.seed))),
        ("greedy", lambda: greedy_search(backbone, catalog, profile, device, state)),
        ("exhaustive", lambda: exhaustive_search(
            backbone, catalog, profile, device, state, cap=args.exhaustive_cap)),
    ]
    for name, run in runners:
        try:
            result = run()
        except SearchSpaceTooLargeError:
            rows.append({"optimizer": name, "status": "skipped"})
            continue
        r = result.report
        rows.append({
            "optimizer": name,
            "status": "ok" if result.feasible else "infeasible",
            "A": f"{r.accuracy:.6f}",
            "A_loss": f"{r.accuracy_loss:.6f}",
            "T": f"{r.latency:.9f}",
            "CSp_ratio": f"{r.param_intensity:.6f}",
            "CSa_ratio": f"{r.activation_intensity:.6f}",
            "E": f"{r.energy_proxy:.6f}",
            "evaluations": result.evaluations,
            "wall_time_seconds": "0.0" if args.no_timestamp else f"{result.wall_time_seconds:.6f}",
        })
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=COMPARE_COLUMNS, restval="")
    writer.writeheader()
    writer.writerows(rows)
    _write_text(args.out, buffer.getvalue())
    print(buffer.getvalue(), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_engine_args(p: argparse.ArgumentParser, with_s_budget: bool) -> None:
    p.add_argument("--backbone", required=True, help="backbone descriptor JSON")
    p.add_argument("--device", required=True, help="device profile JSON")
    p.add_argument("--profile", help="accuracy profile JSON")
    p.add_argument("--synthetic-seed", type=int, default=None,
                   help="build a synthetic accuracy profile with this seed")
    p.add_argument("--catalog", help="operator catalog JSON (default: stock catalog)")
    p.add_argument("--a-threshold", type=float, default=ctx.DEFAULT_A_THRESHOLD,
                   help="accuracy-loss threshold (default %(default)s)")
    p.add_argument("--t-budget", type=float, default=0.1,
                   help="latency budget in seconds (default %(default)s)")
    if with_s_budget:
        p.add_argument("--s-budget", type=float, default=None,
                       help="storage budget in bytes (default: device cache capacity)")
        p.add_argument("--battery", type=float, default=1.0,
                       help="battery fraction for the static context (default 1.0)")
    p.add_argument("--seed", type=int, default=0, help="mutation seed (default 0)")
    p.add_argument("--start-layer", type=int, default=None,
                   help="first backbone layer index open to compression "
                        "(default: the second conv layer)")
    p.add_argument("--exhaustive-cap", type=int, default=DEFAULT_EXHAUSTIVE_CAP,
                   help="refuse exhaustive enumeration beyond this many encodings")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit timestamps and wall times for byte-stable output")
    p.add_argument("--out", required=True, help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convshrink",
        description="Search compression plans for conv backbones under runtime budgets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="print per-layer and total cost counts")
    p.add_argument("backbone", help="backbone descriptor JSON")
    p.set_defaults(handler=cmd_describe)

    p = sub.add_parser("compress", help="one-shot search under a static context")
    _add_engine_args(p, with_s_budget=True)
    p.add_argument("--optimizer", choices=["runtime3c", "greedy", "exhaustive"],
                   default="runtime3c")
    p.set_defaults(handler=cmd_compress)

    p = sub.add_parser("simulate", help="replay a context trace with triggers")
    _add_engine_args(p, with_s_budget=False)
    p.add_argument("--trace", required=True, help="context trace CSV")
    p.add_argument("--trigger", required=True,
                   help="periodic:<seconds> | on_change:<eps> | both:<seconds>:<eps>")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", help="run all three optimizers, emit a CSV")
    _add_engine_args(p, with_s_budget=True)
    p.set_defaults(handler=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except SpecValidationError as exc:
        for line in exc.violations:
            print(f"validation: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, f"missing file: {exc.filename}")
    except IsADirectoryError as exc:
        return _fail(EXIT_IO, f"not a file: {exc.filename}")
    except json.JSONDecodeError as exc:
        return _fail(EXIT_VALIDATION, f"not valid JSON: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except ConvShrinkError as exc:
        return _fail(EXIT_VALIDATION, str(exc))


if __name__ == "__main__":
    sys.exit(main())
