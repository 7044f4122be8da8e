"""Command-line entry point: ``adaptlep {run, sweep, verify, game check}``.

Exit codes: 0 success, 1 configuration error, 2 failed verification.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .environments import load_game
from .errors import ConfigError, DomainError

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2

log = logging.getLogger("adaptlep")


def _overrides(pairs):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _load_config(args) -> harness.SweepConfig:
    text = Path(args.config).read_text() if args.config else ""
    return harness.parse_config(text, _overrides(args.set))


def cmd_run(args) -> int:
    cfg = _load_config(args)
    cells = harness.expand_cells(cfg)
    if len(cells) != 1:
        raise ConfigError(f"run takes a single cell, the config expands to {len(cells)}; use sweep")
    cell = cells[0]
    seed = cfg.seed_offset
    stats = [harness.env_statistics(harness.make_environment(cell, seed))] if cell.T else []
    harness.resolve_parameters(cell, stats)
    trace = harness.run_single(cell, seed, detail=False)
    if args.out == "-":
        harness.write_rounds(trace, "/dev/stdout")
    else:
        harness.write_rounds(trace, args.out)
        inv = trace.invariant_summary()
        print(f"{cell.learner}: T={cell.T} K={cell.K} eta={cell.eta:.6g} regret={trace.regret:.4f} "
              f"queries={trace.queries_used} lemma1_violations={inv['lemma1_violations']} "
              f"stability_flags={inv['stability_flags']} -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    result = harness.run_sweep(cfg)
    sys.stdout.write(harness.summary_csv(result))
    for axis, fit in sorted(result.slopes.items()):
        log.info("log-log slope of regret vs %s: %.4f +- %.4f", axis, fit["slope"], fit["stderr"])
    if result.invalid:
        log.warning("%d invalid cell(s) skipped", len(result.invalid))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .checks import run_suite

    results = run_suite()
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_game_check(args) -> int:
    game = load_game(args.file)
    print(game.describe())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptlep", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (("run", cmd_run, "single run; writes the per-round CSV"),
                               ("sweep", cmd_sweep, "grid sweep; prints the summary CSV")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("-c", "--config", help="key = value config file")
        sp.add_argument("set", nargs="*", metavar="key=value", help="config overrides")
        if name == "run":
            sp.add_argument("-o", "--out", default="-", help="per-round CSV path ('-' for stdout)")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("verify", help="run the invariant suite")
    sp.set_defaults(func=cmd_verify)

    game = sub.add_parser("game", help="partial-monitoring game tools")
    gsub = game.add_subparsers(dest="game_command", required=True)
    gc = gsub.add_parser("check", help="validate a game file and report L = WH / revealing action")
    gc.add_argument("file")
    gc.set_defaults(func=cmd_game_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
