"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, GossipDDAError
from .experiment import (
    PLOT_KINDS,
    PRESETS,
    RunResult,
    dump_config,
    emit_plots,
    load_config,
    run_experiment,
    validate_config,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parse_set(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}", None)
        k, v = item.split("=", 1)
        out[k.strip()] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gossipdda", description="Distributed dual averaging experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out=True):
        sp.add_argument("--config", type=Path, help="key = value configuration file")
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--seed", type=int, action="append",
                        help="seed to run (repeatable); overrides the config seeds")
        sp.add_argument("--lazy", action="store_true", help="use lazy weights (I + P) / 2")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="override any config key")
        if out:
            sp.add_argument("--out-dir", type=Path, default=Path("results"))

    common(sub.add_parser("run", help="run a single configuration"))
    common(sub.add_parser("sweep", help="run a preset across its network sizes"))
    common(sub.add_parser("validate-config", help="check a configuration and print it resolved"), out=False)

    pd = sub.add_parser("plot-data", help="write two-column plot series from run CSVs")
    pd.add_argument("csv", type=Path, nargs="+")
    pd.add_argument("--kind", required=True, choices=PLOT_KINDS)
    pd.add_argument("--baseline", type=Path, help="baseline CSV for ratio_vs_rounds")
    pd.add_argument("--out-dir", type=Path, default=Path("plots"))
    return p


def _overrides(args) -> dict:
    ov = _parse_set(args.set)
    if args.seed:
        ov["seeds"] = tuple(args.seed)
    if args.lazy:
        ov["lazy"] = True
    return ov


def _configs(args, sweep: bool):
    """Resolve configs; a preset sweeps its network sizes unless ``n`` is set."""
    ov = _overrides(args)
    if args.preset:
        spec = PRESETS[args.preset]
        cfg = load_config(args.config, ov, base=spec["base"].with_(n=spec["ns"][0]))
        ns = (cfg.n,) if "n" in ov or not sweep else spec["ns"]
        cfgs = [cfg.with_(n=n) for n in ns]
        for c in cfgs:
            validate_config(c)
        return cfgs
    if sweep:
        raise ConfigError("sweep needs --preset", "preset")
    return [load_config(args.config, ov)]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "plot-data":
            baseline = RunResult.from_csv(args.baseline) if args.baseline else None
            for path in args.csv:
                for out in emit_plots(RunResult.from_csv(path), args.kind, args.out_dir, baseline):
                    print(out)
            return EXIT_OK
        cfgs = _configs(args, args.command == "sweep")
        if args.command == "validate-config":
            for cfg in cfgs:
                sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        for cfg in cfgs:
            result = run_experiment(cfg, args.out_dir)
            print(f"{cfg.name} n={cfg.n} b={result.manifest['b']} k={result.manifest['k']} "
                  f"mu={result.manifest['mu']} rounds={result.manifest['rounds']} -> {args.out_dir}")
        return EXIT_OK
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GossipDDAError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
