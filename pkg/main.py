"""Command-line entry point: run, bounds, sweep, replay, serve."""
import argparse
import json
import logging
import sys
from pathlib import Path

from src.config.logging_setup import configure_logging
from src.config.settings import settings
from src.models.entropy import EATParams
from src.models.errors import ConfigInvalid, ConfigParseError, DomainError, SimulationPanic

logger = logging.getLogger("src.cli")

EXIT_OK, EXIT_CONFIG, EXIT_PANIC = 0, 2, 3


class FlagError(Exception):
    pass


def _common(parser: argparse.ArgumentParser, config_required: bool = True) -> None:
    parser.add_argument("--config", required=config_required, help="run config (.json or .toml)")
    parser.add_argument("--trials", type=int, help="trials per cell, overrides the config")
    parser.add_argument("--seed", help="hex master seed, overrides the config")
    parser.add_argument("--workers", type=int, help=f"worker processes (default {settings.default_workers})")
    parser.add_argument("--out", help=f"output directory (default {settings.output_dir})")
    parser.add_argument("--quiet", action="store_true", help="no progress bar")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvpv", description="Position verification from certified randomness: desk-scale simulator")
    parser.add_argument("--log-level", default=None, help=f"logging level (default {settings.log_level})")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a trial campaign")
    _common(run)

    sweep = sub.add_parser("sweep", help="run the config's sweep grid and write sweep.csv")
    _common(sweep)

    replay = sub.add_parser("replay", help="re-run one recorded trial and dump its event log")
    replay.add_argument("seed", help="trial seed as recorded in trials.jsonl (hex)")
    replay.add_argument("--config", required=True)
    replay.add_argument("--out", help="write events.jsonl here instead of stdout")
    replay.add_argument("--record", help="trials.jsonl holding the trial, to replay a sweep cell")
    replay.add_argument("--line", type=int, default=1, help="1-based line of the trial in --record")

    bounds = sub.add_parser("bounds", help="evaluate entropy and success-probability bounds")
    bounds.add_argument("--n", type=int, help="EAT: rounds")
    bounds.add_argument("--h", type=float, help="EAT: per-round rate")
    bounds.add_argument("--c1", type=float, help="EAT: sqrt(n) coefficient")
    bounds.add_argument("--c0", type=float, help="EAT: constant correction")
    bounds.add_argument("--eps", type=float, help="smoothing parameter (g correction, smooth min-entropy, EAT)")
    bounds.add_argument("--h-smooth", type=float, help="smooth min-entropy to de-smooth")
    bounds.add_argument("--p-test", type=float, help="single-round cheat probability")
    bounds.add_argument("--hmin", type=float, help="single-round min-entropy")
    bounds.add_argument("--p-block", type=float, help="per-block cheat probability")
    bounds.add_argument("--alpha", type=float, help="fraction of blocks that must pass")
    bounds.add_argument("--m", type=int, help="number of blocks")
    bounds.add_argument("--qubits", type=int, help="XHOG: qubit count n")
    bounds.add_argument("--delta", type=float, help="XHOG: score margin")
    bounds.add_argument("--eta", type=float, help="XHOG: slack")
    bounds.add_argument("--c-log", type=float, help="XHOG: O(log n) constant (default 0)")

    serve = sub.add_parser("serve", help="serve the HTTP API with uvicorn")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--reload", action="store_true")
    return parser


def _group(args, names, required, label):
    given = {n: getattr(args, n) for n in names if getattr(args, n) is not None}
    if not given:
        return None
    missing = [n for n in required if n not in given]
    if missing:
        raise FlagError(f"{label} needs --{', --'.join(m.replace('_', '-') for m in missing)}")
    return given


def bounds_report(args) -> dict:
    from src.service.entropy_service import bound_report

    eat = _group(args, ("n", "h", "c1", "c0"), ("n", "h"), "the EAT bound")
    smooth = _group(args, ("h_smooth",), ("h_smooth",), "smooth min-entropy")
    single = _group(args, ("p_test", "hmin"), ("p_test", "hmin"), "the single-round bound")
    repeated = _group(args, ("p_block", "alpha", "m"), ("p_block", "alpha", "m"), "the repeated bound")
    xhog = _group(args, ("qubits", "delta", "eta", "c_log"), ("qubits", "delta", "eta"), "the XHOG bound")
    if smooth is not None and args.eps is None:
        raise FlagError("smooth min-entropy needs --eps")
    if not any((eat, smooth, single, repeated, xhog, args.eps is not None)):
        raise FlagError("give at least one complete parameter group")

    success = {}
    if single:
        success.update(p_test=single["p_test"], hmin=single["hmin"])
    if repeated:
        success.update(p_block=repeated["p_block"], alpha=repeated["alpha"], m=repeated["m"])
    try:
        eat_params = None
        if eat:
            eat_params = EATParams(n=eat["n"], h=eat["h"], c1=eat.get("c1", 0.0), c0=eat.get("c0", 0.0),
                                   **({"eps": args.eps} if args.eps is not None else {}))
    except ValueError as e:
        raise DomainError(str(e)) from e
    return bound_report(
        eat=eat_params,
        g_eps=args.eps if args.eps is not None and smooth is None else None,
        smooth=(args.h_smooth, args.eps) if smooth is not None else None,
        success=success or None,
        xhog={"n": xhog["qubits"], "delta": xhog["delta"], "eta": xhog["eta"],
              "c_log": xhog.get("c_log", 0.0)} if xhog else None,
    )


def cmd_run(args) -> int:
    from src.core.campaign import run_campaign

    report = run_campaign(args.config, trials=args.trials, seed=args.seed, workers=args.workers,
                          out_dir=args.out, progress=not args.quiet)
    for cell in report.cells:
        print(f"{cell.strategy:<24} {cell.mode:<15} accept={cell.accept_rate:.3f} {cell.reason_histogram}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from src.core.campaign import load_run_config, run_campaign, sweep_table

    config = load_run_config(args.config)
    out = Path(args.out or config.out_dir)
    report = run_campaign(config, trials=args.trials, seed=args.seed, workers=args.workers,
                          out_dir=out, progress=not args.quiet)
    table = sweep_table(report)
    table.to_csv(out / "sweep.csv", index=False)
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_replay(args) -> int:
    from src.core.campaign import read_record, replay

    record = read_record(args.record, args.line) if args.record else None
    verdict, transcript, log = replay(args.config, args.seed, record)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "events.jsonl").write_text(log.to_jsonl(), encoding="utf-8")
    else:
        sys.stdout.write(log.to_jsonl())
    print(json.dumps({"verdict": "Accept" if verdict.accept else "Reject", "reason": verdict.reason.value,
                      "events": len(log)}), file=sys.stderr)
    return EXIT_OK


def cmd_bounds(args) -> int:
    print(json.dumps(bounds_report(args), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("src.api.main:app", host=args.host, port=args.port, reload=args.reload,
                log_config=None)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "replay": cmd_replay, "bounds": cmd_bounds,
            "serve": cmd_serve}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(level=args.log_level)
    try:
        return COMMANDS[args.command](args)
    except FlagError as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigParseError, ConfigInvalid, DomainError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG
    except SimulationPanic as e:
        logger.error(f"simulation panic: {e}")
        return EXIT_PANIC
    except Exception as e:
        logger.exception(f"unexpected failure: {e}")
        return EXIT_PANIC


if __name__ == "__main__":
    sys.exit(main())
