"""Command line: ``learn``, ``run``, ``bench``, ``verify`` and ``gen-dist``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .bench import (EXIT_USAGE, BenchConfig, cmd_bench, cmd_learn, cmd_run, cmd_verify,
                    constants_report, rows_to_csv, write_text)
from .distributions import FAMILIES, distribution_to_json, instance_to_bytes, instance_to_text
from .errors import ContractViolation, InvalidInputError, StaleStructuresError

EXIT_STALE = 3
EXIT_IO = 4


def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", choices=["maxima", "hull"], default="maxima")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--family", choices=sorted(FAMILIES))
    src.add_argument("--dist-file", help="distribution JSON written by gen-dist")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--c", type=float, default=8.0)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--t-slabs", type=int)
    p.add_argument("--t-freq", type=int)
    p.add_argument("--freq-cap", type=int, default=BenchConfig.freq_cap,
                   help="upper limit on frequency instances (0 for none)")
    p.add_argument("--level-param", type=int)
    p.add_argument("--spacing", type=int)
    p.add_argument("--tail", type=int)
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--entropy-samples", type=int, default=100)
    p.add_argument("--paper-constants", action="store_true",
                   help="print the learning formulas with their values and exit")


def _config(args) -> BenchConfig:
    family = args.family
    if family is None and args.dist_file is None:
        family = "uniform"
    return BenchConfig(
        problem=args.problem, family=family, dist_file=args.dist_file, n=args.n,
        seed=args.seed, epsilon=args.epsilon, c=args.c, delta=args.delta,
        t_slabs=args.t_slabs, t_freq=args.t_freq, freq_cap=args.freq_cap or None,
        level_param=args.level_param, spacing=args.spacing, tail=args.tail,
        gamma=args.gamma, trials=args.trials, entropy_samples=args.entropy_samples,
    ).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfimproving",
                                     description="Self-improving planar maxima and upper hulls.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="run the learning phase and store its structures")
    _config_flags(p)
    p.add_argument("--out", default="structures", help="output directory")

    p = sub.add_parser("run", help="limiting-phase trials as JSON lines")
    _config_flags(p)
    p.add_argument("--structures", default="structures", help="directory written by learn")
    p.add_argument("--out", help="JSON-lines file (default: standard output)")

    p = sub.add_parser("bench", help="CSV summary over a ladder of sizes")
    _config_flags(p)
    p.add_argument("--ladder", default="1024,4096", help="comma-separated sizes")
    p.add_argument("--out", help="CSV file (default: standard output)")
    p.add_argument("--json", help="also write rows with standard deviations as JSON")

    p = sub.add_parser("verify", help="check a certificate against an instance")
    p.add_argument("instance", help="text ('x y' per line) or .bin instance")
    p.add_argument("certificate", help="certificate JSON")

    p = sub.add_parser("gen-dist", help="write a generator family as distribution JSON")
    p.add_argument("--family", choices=sorted(FAMILIES), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--instances", type=int, default=0, help="also sample this many instances")
    p.add_argument("--binary", action="store_true", help="write instances as .bin")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except StaleStructuresError as exc:
        print(f"stale structures: {exc}", file=sys.stderr)
        return EXIT_STALE
    except ContractViolation as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 1
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _dispatch(args) -> int:
    if args.command == "verify":
        return cmd_verify(args.instance, args.certificate, sys.stderr)
    if args.command == "gen-dist":
        return _gen_dist(args)
    config = _config(args)
    if args.paper_constants:
        print(constants_report(config.n, config.constants, config.hull_params))
        return 0
    if args.command == "learn":
        manifest = cmd_learn(config, args.out)
        print(json.dumps(manifest["summary"], sort_keys=True))
        return 0
    if args.command == "run":
        out = open(args.out, "w", encoding="utf-8", newline="\n") if args.out else sys.stdout
        try:
            for _ in cmd_run(config, args.structures, out):
                pass
        finally:
            if args.out:
                out.close()
        return 0
    ladder = [int(v) for v in args.ladder.split(",") if v.strip()]
    rows = cmd_bench(config, ladder)
    text = rows_to_csv(rows)
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    if args.json:
        write_text(args.json, json.dumps([asdict(r) for r in rows], indent=2) + "\n")
    return 0


def _gen_dist(args) -> int:
    from .distributions import make_family

    d = make_family(args.family, args.n, args.seed)
    out = Path(args.out)
    write_text(out, distribution_to_json(d) + "\n")
    for k in range(args.instances):
        pts = d.sample(k)
        if args.binary:
            out.with_name(f"{out.stem}_{k}.bin").write_bytes(instance_to_bytes(pts))
        else:
            write_text(out.with_name(f"{out.stem}_{k}.txt"), instance_to_text(pts))
    return 0


if __name__ == "__main__":
    sys.exit(main())
