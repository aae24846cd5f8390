"""Command-line interface: ``mlayout <command> ...``.

Exit codes: 0 success, 1 domain error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import pandas as pd

from . import synthetic as Syn
from .bench import op_suite
from .density import DEFAULT_NU_MODE
from .dsl import BUILTINS, format_layout, load_layout
from .errors import MlayoutError
from .estimator import resolve_layout
from .evaluation import characteristic_grid, predict, repeat_eval
from .inference import infer_profile
from .manifest import now, write_manifest
from .sampler import SamplerConfig, Trace
from .sampler.trace import ALGORITHMS
from .table import InstanceTable

OUT_ENV = "MLAYOUT_OUT"
DEFAULT_OUT = "mlayout-out"
FLATNAV = "flatNavAbility"

log = logging.getLogger("mlayout")


# -- argument helpers -------------------------------------------------------
def parse_agents(text: str) -> list[int]:
    """``"1..30"``, ``"1-5"``, ``"1,2,3"`` or a mix of these."""
    ids = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        for sep in ("..", "-"):
            if sep in part:
                lo, hi = part.split(sep, 1)
                ids.extend(range(int(lo), int(hi) + 1))
                break
        else:
            ids.append(int(part))
    return sorted(set(ids))


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _flags(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _uniform(args) -> tuple:
    names = list(getattr(args, "uniform_prior", None) or [])
    if getattr(args, "flatnav_uniform", False):
        names.append(FLATNAV)
    return tuple(dict.fromkeys(names))


def _config(args) -> SamplerConfig:
    return SamplerConfig(chains=args.chains, tune=args.tune, draws=args.draws, target_accept=args.target_accept,
                         max_treedepth=args.max_treedepth, seed=args.seed, algorithm=args.algorithm)


def _layout(args):
    return resolve_layout(args.layout, _uniform(args))


def _inputs(*paths) -> list:
    return [p for p in paths if p is not None and Path(p).is_file()]


def _add_sampler(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--tune", type=int, default=1000)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--target-accept", type=float, default=0.8)
    p.add_argument("--max-treedepth", type=int, default=10)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="nuts")
    p.add_argument("--nu-mode", default=DEFAULT_NU_MODE, help="one-minus-mean, mean or fixed:<x>")
    p.add_argument("--backend", choices=("auto", "numpy", "numba"), default="auto")


def _add_layout(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--layout", required=required, default=None if required else "op",
                   help=f"builtin ({', '.join(BUILTINS)}) or .mlayout path")
    p.add_argument("--uniform-prior", action="append", metavar="PARAM",
                   help="replace PARAM's prior by a uniform over its declared range (repeatable)")
    p.add_argument("--flatnav-uniform", action="store_true",
                   help=f"shorthand for --uniform-prior {FLATNAV}")


# -- commands ---------------------------------------------------------------
def cmd_validate(args) -> int:
    layout = load_layout(args.layout)
    print(f"valid: layout {layout.name!r} with {len(layout.meta_features)} meta-features, "
          f"{len(layout.parameters)} parameters, {len(layout.derived)} derived nodes, "
          f"observed {layout.observed.name!r}")
    if args.format:
        sys.stdout.write(format_layout(layout))
    return 0


def cmd_infer(args) -> int:
    started = now()
    layout = _layout(args)
    table = InstanceTable.read_csv(args.data)
    profile, trace = infer_profile(layout, table, _config(args), nu_mode=args.nu_mode, backend=args.backend)
    out = _out_dir(args)
    profile.to_json(out / "profile.json")
    trace.to_csv(out / "trace.csv")
    write_manifest(out, command="infer", flags=_flags(args), seeds={"seed": args.seed},
                   inputs=_inputs(args.data, args.layout), started=started)
    print(f"{layout.name}: {len(profile.params)} parameters, {trace.divergence_count} divergences -> {out}")
    return 0


def _read_nu(args) -> float:
    if args.nu is not None:
        return float(args.nu)
    if args.profile is None:
        raise MlayoutError("predict needs --nu or --profile (to read the training nu)")
    return float(json.loads(Path(args.profile).read_text("utf-8"))["config"]["nu"])


def cmd_predict(args) -> int:
    started = now()
    layout = _layout(args)
    trace = Trace.read_csv(args.trace)
    table = InstanceTable.read_csv(args.data)
    preds = predict(layout, trace, table.without_outcomes(), _read_nu(args))
    out = _out_dir(args)
    frame = pd.DataFrame({"instance_id": table.ids, "p": preds.p})
    frame.to_csv(out / "predictions.csv", index=False, float_format="%.17g", lineterminator="\n")
    write_manifest(out, command="predict", flags=_flags(args),
                   inputs=_inputs(args.data, args.trace, args.profile, args.layout), started=started)
    print(f"{len(frame)} predictions -> {out / 'predictions.csv'}")
    return 0


def cmd_evaluate(args) -> int:
    started = now()
    layout = _layout(args)
    table = InstanceTable.read_csv(args.data)
    report = repeat_eval(layout, table, frac=args.split, repeats=args.repeats, seed=args.seed,
                         config=_config(args), nu_mode=args.nu_mode, backend=args.backend)
    out = _out_dir(args)
    d = report.to_dict()
    (out / "brier.json").write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")
    write_manifest(out, command="evaluate", flags=_flags(args), seeds={"seed": args.seed},
                   inputs=_inputs(args.data, args.layout), started=started)
    print(f"ML BS {d['ML BS']:.4f}  Agg BS {d['Agg BS']:.4f}  over {d['repeats']} repeats")
    return 0


def _parse_counts(text: str | None) -> dict | None:
    if text is None:
        return None
    counts = {}
    for part in text.split(","):
        name, value = part.split("=")
        op, ctrl = value.split(":")
        counts[name.strip()] = (int(op), int(ctrl))
    return counts


def cmd_sim_instances(args) -> int:
    started = now()
    out = _out_dir(args)
    if args.scenario == "aaio":
        table = Syn.gen_aaio_instances(args.n or 69, args.seed)
        meta = {"generator": "aaio-instances", "n": len(table), "seed": args.seed}
        (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    else:
        counts = _parse_counts(args.counts) or dict(Syn.DEFAULT_COUNTS)
        if args.n:
            counts = Syn.scale_counts(args.n, counts)
        table = Syn.gen_op_instances(counts, args.seed)
        Syn.write_meta(out / "meta.json", counts=counts, seed=args.seed)
    table.to_csv(out / "instances.csv")
    write_manifest(out, command="simulate instances", flags=_flags(args), seeds={"seed": args.seed},
                   started=started)
    print(f"{len(table)} instances -> {out / 'instances.csv'}")
    return 0


def cmd_sim_agent(args) -> int:
    started = now()
    table = InstanceTable.read_csv(args.data)
    y = Syn.simulate_agent(args.agent, table, args.seed)
    out = _out_dir(args)
    table.with_outcomes(y).to_csv(out / f"agent_{args.agent:02d}.csv")
    write_manifest(out, command="simulate agent", flags=_flags(args), seeds={"seed": args.seed},
                   inputs=_inputs(args.data), started=started)
    print(f"agent {args.agent}: success rate {y.mean():.4f} -> {out}")
    return 0


def _profile_values(args) -> dict:
    values = {}
    if args.values:
        d = json.loads(Path(args.values).read_text("utf-8"))
        if "parameters" in d:
            d = {k: v["mean"] for k, v in d["parameters"].items()}
        values.update({k: float(v) for k, v in d.items()})
    for item in args.set or []:
        name, value = item.split("=", 1)
        values[name.strip()] = float(value)
    return values


def cmd_sim_profile(args) -> int:
    started = now()
    layout = _layout(args)
    table = InstanceTable.read_csv(args.data)
    nu = None if args.nu is None else float(args.nu)
    y = Syn.simulate_from_profile(layout, _profile_values(args), table, args.seed, nu=nu, nu_mode=args.nu_mode)
    out = _out_dir(args)
    table.with_outcomes(y).to_csv(out / "outcomes.csv")
    write_manifest(out, command="simulate profile", flags=_flags(args), seeds={"seed": args.seed},
                   inputs=_inputs(args.data, args.values, args.layout), started=started)
    print(f"success rate {y.mean():.4f} -> {out / 'outcomes.csv'}")
    return 0


def cmd_grid(args) -> int:
    started = now()
    table = InstanceTable.read_csv(args.data)
    layout = load_layout(args.layout) if args.layout else None
    grid = characteristic_grid(table, args.x, args.y, args.bins_x, args.bins_y, layout=layout)
    out = _out_dir(args)
    grid.to_csv(out / "grid.csv")
    write_manifest(out, command="grid", flags=_flags(args), inputs=_inputs(args.data, args.layout),
                   started=started)
    print(f"{args.bins_x}x{args.bins_y} grid over {args.x}, {args.y} -> {out / 'grid.csv'}")
    return 0


def cmd_bench_op(args) -> int:
    started = now()
    out = _out_dir(args)
    counts = Syn.scale_counts(args.total) if args.total else None
    result = op_suite(out, seed=args.seed, agents=parse_agents(args.agents), counts=counts,
                      config=_config(args), test_frac=args.split, nu_mode=args.nu_mode,
                      uniform_priors=_uniform(args), layout=args.layout, backend=args.backend)
    write_manifest(out, command="bench op-suite", flags=_flags(args), seeds={"seed": args.seed},
                   inputs=_inputs(args.layout), started=started)
    b = result.brier
    print(f"{len(b)} agents: mean ML BS {b['ML BS'].mean():.4f}, mean Agg BS {b['Agg BS'].mean():.4f} -> {out}")
    return 0


# -- parser -----------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlayout", description="Measurement layouts for cognitive profiles.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    out_help = f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})"

    p = sub.add_parser("validate", help="parse and validate a layout")
    p.add_argument("layout", help=f"builtin ({', '.join(BUILTINS)}) or .mlayout path")
    p.add_argument("--format", action="store_true", help="print the canonical form")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("infer", help="infer a cognitive profile from outcomes")
    _add_layout(p)
    p.add_argument("--data", required=True, help="instance CSV with a success column")
    p.add_argument("--out", help=out_help)
    _add_sampler(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("predict", help="posterior-predictive success probabilities")
    _add_layout(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--profile", help="profile JSON whose training nu is reused")
    p.add_argument("--nu", type=float)
    p.add_argument("--out", help=out_help)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="repeated split Brier scores, model vs aggregate")
    _add_layout(p)
    p.add_argument("--data", required=True)
    p.add_argument("--split", type=float, default=0.2, help="test fraction")
    p.add_argument("--repeats", type=int, default=15)
    p.add_argument("--out", help=out_help)
    _add_sampler(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="generate instances or outcomes")
    ssub = p.add_subparsers(dest="what", required=True)
    q = ssub.add_parser("instances", help="instance table")
    q.add_argument("--scenario", choices=("op", "aaio"), default="op")
    q.add_argument("--n", type=int, help="total instances (op: scales the paradigm counts)")
    q.add_argument("--counts", help="op counts, e.g. cup=359:239,grid=191:239")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", help=out_help)
    q.set_defaults(func=cmd_sim_instances)
    q = ssub.add_parser("agent", help="outcomes of a rule-based synthetic agent")
    q.add_argument("--agent", type=int, required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", help=out_help)
    q.set_defaults(func=cmd_sim_agent)
    q = ssub.add_parser("profile", help="outcomes from the layout at a fixed profile")
    _add_layout(q)
    q.add_argument("--data", required=True)
    q.add_argument("--values", help="JSON of parameter values or a profile JSON (means)")
    q.add_argument("--set", action="append", metavar="NAME=VALUE")
    q.add_argument("--nu", type=float, help="fixed nu; default solves for a self-consistent value")
    q.add_argument("--nu-mode", default=DEFAULT_NU_MODE)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", help=out_help)
    q.set_defaults(func=cmd_sim_profile)

    p = sub.add_parser("grid", help="characteristic grid of success rates")
    p.add_argument("--data", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--bins-x", type=int, default=5)
    p.add_argument("--bins-y", type=int, default=5)
    p.add_argument("--layout", help="take bin ranges from this layout's meta-features")
    p.add_argument("--out", help=out_help)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("bench", help="end-to-end benchmarks")
    bsub = p.add_subparsers(dest="suite", required=True)
    q = bsub.add_parser("op-suite", help="30 synthetic agents on the object-permanence battery")
    _add_layout(q, required=False)
    q.add_argument("--agents", default="1..30", help="e.g. 1..30 or 1,2,3")
    q.add_argument("--total", type=int, help="total instances (scales the default paradigm counts)")
    q.add_argument("--split", type=float, default=0.2, help="test fraction")
    q.add_argument("--out", help=out_help)
    _add_sampler(q)
    q.set_defaults(func=cmd_bench_op)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except (MlayoutError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
