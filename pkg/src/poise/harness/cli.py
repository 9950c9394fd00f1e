"""Command-line entry point: ``poise compile|gen|simulate|exp|report``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .. import corpus
from ..compiler import CompileError, ResourceModel, compile_policy, program_to_json, render
from ..compiler.pipeline import NO_OPTIMIZATION
from ..lang import PolicyError, parse
from ..workload.io import TraceFormatError, write_trace
from .config import ConfigError, config_from_mapping, load_config, parse_action
from .experiments import EXPERIMENTS, build_program, experiment_kwargs, generate_trace, run
from .metrics import read_csv

EXIT_POLICY = 3
EXIT_TRACE = 4
EXIT_CONFIG = 5

GEN_DEFAULTS = {
    "clients": {"kind": "clients", "horizon_s": 100.0, "clients": [{"sip": "10.0.0.2"}]},
    "saturation": {"kind": "saturation", "rate": 1000.0, "duration_s": 1.0},
    "eviction": {"kind": "eviction", "victim": {"sip": "10.0.0.2", "sport": 40000},
                 "attacker_sip": "198.18.0.1", "rate": 1000.0, "duration_s": 1.0},
    "agility": {"kind": "agility", "allow": {}, "deny": {}},
}


def _policy_text(policy):
    if policy in corpus.NAMES:
        return corpus.source(policy)
    path = Path(policy)
    if not path.is_file():
        raise ConfigError(f"policy file not found: {path}")
    return path.read_text(encoding="utf-8")


def cmd_compile(args):
    src = _policy_text(args.policy)
    resources = ResourceModel.load(args.resources) if args.resources else ResourceModel()
    action = parse_action(args.default_action) if args.default_action else None
    name = Path(args.policy).stem
    prog = compile_policy(parse(src, name=name), resources,
                          optimize_tables=NO_OPTIMIZATION if args.no_optimize else True,
                          check_conflicts=not args.no_conflicts, default_action=action, name=name)
    if args.emit == "program-json":
        text = json.dumps(program_to_json(prog), sort_keys=True, indent=1) + "\n"
    else:
        text = render(prog)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{name}.{'json' if args.emit == 'program-json' else 'p4'}"
        path.write_text(text)
        print(path)
    else:
        sys.stdout.write(text)
    print(f"# {name}: {len(prog.tables)} tables, {len(prog.alu)} ALU ops, {prog.rounds} pass(es), "
          f"SRAM {prog.memory.sram_utilization:.2%}, TCAM {prog.memory.tcam_utilization:.2%}",
          file=sys.stderr)
    return 0


def cmd_gen(args):
    if args.config:
        cfg = load_config(args.config, seed=args.seed)
        spec = dict(cfg.trace) or dict(GEN_DEFAULTS[args.kind])
        spec.setdefault("kind", args.kind)
        policy, seed = cfg.policy_source(), cfg.seed
    else:
        if args.seed is None:
            raise ConfigError("--seed is required")
        spec = dict(GEN_DEFAULTS[args.kind])
        policy, seed = _policy_text(args.policy), args.seed
    if args.rate is not None:
        spec["rate"] = args.rate
    if args.duration is not None:
        spec["duration_s" if args.kind != "clients" else "horizon_s"] = args.duration
    vp, prog = build_program(policy)
    trace = generate_trace(spec, vp, prog.layout, seed)
    write_trace(trace, args.out, {"kind": spec.get("kind"), "seed": seed})
    print(f"{args.out}: {len(trace)} events")
    return 0


def cmd_simulate(args):
    cfg = load_config(args.config, seed=args.seed, mode=args.mode)
    report, _, path = run(cfg, out_dir=args.out)
    print(f"{path}: {report.packets_in} packets, verdicts {dict(sorted(report.verdicts.items()))}")
    return 0


def cmd_exp(args):
    cfg = None
    if args.config:
        cfg = load_config(args.config, seed=args.seed)
    elif args.seed is None:
        raise ConfigError("--seed or --config is required")
    else:
        cfg = config_from_mapping({"seed": args.seed, "name": args.name})
    kw = experiment_kwargs(args.name, cfg)
    table = EXPERIMENTS[args.name](**kw)
    out = Path(args.out) if args.out else cfg.resolve(cfg.out)
    path = table.write(out / f"{args.name}.csv")
    print(path)
    return 0


def cmd_report(args):
    for path in args.csv:
        kind, meta, rows = read_csv(path)
        print(f"== {path} ({kind}{''.join(f', {k}={v}' for k, v in sorted(meta.items()))})")
        if not rows:
            continue
        cols = list(rows[0])
        widths = [max(len(c), *(len(r[c]) for r in rows)) for c in cols]
        print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
        for r in rows:
            print("  ".join(r[c].ljust(w) for c, w in zip(cols, widths)))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="poise", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("compile", help="compile a policy to a switch program")
    p.add_argument("policy", help="policy file or corpus name (p1..p7)")
    p.add_argument("--resource-model", "--resources", dest="resources", help="resource model TOML")
    p.add_argument("--emit", "--format", dest="emit", choices=("pseudo-p4", "program-json"),
                   default="pseudo-p4")
    p.add_argument("--default-action")
    p.add_argument("--no-optimize", action="store_true")
    p.add_argument("--no-conflicts", action="store_true")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("gen", help="generate a trace file")
    p.add_argument("kind", choices=sorted(GEN_DEFAULTS))
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--policy", default="p1")
    p.add_argument("--rate", type=float)
    p.add_argument("--duration", type=float, help="seconds")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("simulate", help="run one configured simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("poise", "baseline"))
    p.add_argument("--out")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("exp", help="run a named experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_exp)

    p = sub.add_parser("report", help="print metrics CSV files")
    p.add_argument("csv", nargs="+")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None):
    level = getattr(logging, os.environ.get("POISE_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("poise").setLevel(level)
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (PolicyError, CompileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POLICY
    except TraceFormatError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
