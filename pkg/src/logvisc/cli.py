"""
Command-line entry point.

    logvisc simulate <config> [--output-dir DIR]
    logvisc verify <suite|all> [--manifest PATH]
    logvisc mollify-exp <config> --scales 4 2 1 0.5
    logvisc dump-config <config>
    logvisc resume <checkpoint> [--config CONFIG]

Exit codes: 0 success, 1 usage or input error, 2 solver failure,
3 verification failure.  ``LOGVISC_THREADS`` caps the threads used by the
linear-algebra backend.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

from . import __version__
from .config import config_hash, dump_config, parse_config
from .errors import CheckpointError, ConfigError, LogViscError

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="logvisc", description="log-strain viscoelastic flow simulator")
    p.add_argument("--version", action="version", version=f"logvisc {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="run a configured scenario")
    s.add_argument("config")
    s.add_argument("--output-dir", help="override output_dir from the config")

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("suite", help="suite name or 'all'")
    v.add_argument("--manifest", help="write per-check results as JSON")

    m = sub.add_parser("mollify-exp", help="mollification refinement experiment")
    m.add_argument("config")
    m.add_argument("--scales", type=float, nargs="+", default=[4.0, 2.0, 1.0, 0.5])

    d = sub.add_parser("dump-config", help="print the canonical form of a config")
    d.add_argument("config")

    r = sub.add_parser("resume", help="continue a run from a checkpoint")
    r.add_argument("checkpoint")
    r.add_argument("--config", help="refuse to resume unless the checkpoint matches this config")
    return p


def _check_threads() -> None:
    raw = os.environ.get("LOGVISC_THREADS")
    if raw is not None and not (raw.strip().isdigit() and int(raw) > 0):
        raise ConfigError(f"LOGVISC_THREADS must be a positive integer, got {raw!r}")


def _finish(sim, t0: float) -> int:
    last = sim.records[-1]
    print(f"steps={sim.step_index} dt={sim.dt:.6g} t={sim.state.time:.6g} "
          f"kinetic={last.kinetic:.6e} elastic={last.elastic:.6e} "
          f"det_err={last.det_err_max:.3e} wall={time.perf_counter() - t0:.2f}s")
    print(f"outputs in {sim.cfg.output_dir}")
    return EXIT_OK


def run_scenario(cfg) -> int:
    """Run a configuration with all outputs and return the exit status."""
    from .simulation import Simulation

    t0 = time.perf_counter()
    sim = Simulation(cfg)
    sim.run(outputs=True)
    return _finish(sim, t0)


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    if args.output_dir:
        cfg = dataclasses.replace(cfg, output_dir=args.output_dir)
    return run_scenario(cfg)


def cmd_verify(args) -> int:
    from . import verification

    names = list(verification.SUITES) if args.suite == "all" else [args.suite]
    if args.suite != "all" and args.suite not in verification.SUITES:
        print(f"unknown suite {args.suite!r}; choose from all, {', '.join(verification.SUITES)}",
              file=sys.stderr)
        return EXIT_USAGE
    table, failed = {}, 0
    for name in names:
        print(f"[{name}]")
        rows = []
        for res in verification.run_suite(name):
            print("  " + res.summary())
            failed += not res.passed
            rows.append({"check": res.name, "passed": bool(res.passed),
                         "metrics": {k: float(v) for k, v in res.metrics.items()
                                     if isinstance(v, (int, float))}})
        table[name] = rows
    total = sum(len(v) for v in table.values())
    print(f"{total - failed}/{total} checks passed")
    if args.manifest:
        with open(args.manifest, "w") as fh:
            json.dump({"code_version": __version__, "suites": table}, fh, indent=2)
            fh.write("\n")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_mollify(args) -> int:
    from . import verification

    cfg = parse_config(args.config)
    try:
        rep = verification.mollify_refinement_experiment(cfg, args.scales)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_dump(args) -> int:
    sys.stdout.write(dump_config(parse_config(args.config)))
    return EXIT_OK


def cmd_resume(args) -> int:
    from .simulation import Simulation

    expected = config_hash(parse_config(args.config)) if args.config else None
    t0 = time.perf_counter()
    sim = Simulation.from_checkpoint(args.checkpoint, expected_hash=expected)
    sim.run(outputs=True)
    return _finish(sim, t0)


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "mollify-exp": cmd_mollify,
            "dump-config": cmd_dump, "resume": cmd_resume}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_threads()
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LogViscError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
