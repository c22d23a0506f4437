"""Trial campaigns: run many seeded trials, aggregate, and write reports.

Per-trial seeds come from a counter-mode PRF of the master seed, so the worker
count never changes a result. Aggregation happens after all trials join.
"""
import itertools
import json
import logging
import time

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError
from tqdm import tqdm

from src.core.adversaries import informed_cross_talk, strategy
from src.core.compilers import RunOutcome, run_protocol
from src.core.spacetime import check_light_cones
from src.models.campaign import CampaignReport, CellReport, RunConfig, StrategySpec, SweepSpec, TrialRecord
from src.models.cvpv import CompilerConfig
from src.models.errors import CVPVError, ConfigInvalid, ConfigParseError, SimulationPanic
from src.service.oracle_service import derive_seed

logger = logging.getLogger(__name__)

REASONS = ("None", "Timing", "Consistency", "CRTest")


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Parse a .json or .toml run config; any failure is a ConfigParseError."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
        data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        return RunConfig.model_validate(data)
    except (OSError, json.JSONDecodeError, tomllib.TOMLDecodeError, ValidationError) as e:
        raise ConfigParseError(f"cannot load run config {path}: {e}") from e


def trial_seeds(master: bytes, count: int) -> List[int]:
    return [derive_seed(master, "trial", t) for t in range(count)]


def seed_hex(seed: int) -> str:
    return format(seed, "016x")


def with_overrides(compiler: CompilerConfig, overrides: Dict[str, Any]) -> CompilerConfig:
    """Apply dotted-path overrides (``backend.rcs.delta``) and re-validate."""
    data = compiler.model_dump()
    for dotted, value in overrides.items():
        node = data
        *parents, leaf = dotted.split(".")
        for part in parents:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[leaf] = value
    try:
        return CompilerConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigInvalid(f"invalid overrides {overrides}: {e}") from e


def for_mode(compiler: CompilerConfig, mode: str) -> CompilerConfig:
    """Adapt a compiler config to another mode; single round forces l = 1."""
    update: Dict[str, Any] = {"mode": mode}
    if mode == "single":
        update["rounds"] = 1
    if mode != "seq-rapid-fire":
        update["blocks"] = 1
    return with_overrides(compiler, update)


def run_trial(compiler: CompilerConfig, strat: StrategySpec, seed: int, trial: int = 0,
              params: Optional[Dict[str, Any]] = None) -> TrialRecord:
    outcome = run_protocol(compiler, strategy(strat.kind, strat.params), seed=seed)
    return trial_record(outcome, compiler, strat, seed, trial, params or {})


def trial_record(outcome: RunOutcome, compiler: CompilerConfig, strat: StrategySpec, seed: int,
                 trial: int, params: Dict[str, Any]) -> TrialRecord:
    verdict, transcript, log = outcome
    scores = [r["score"] for r in verdict.diagnostics.get("cr_results", []) if r.get("score") is not None]
    colluders = tuple(transcript.query_logs)
    return TrialRecord(
        trial=trial, seed=seed_hex(seed), strategy=strat.kind, strategy_params=strat.params,
        mode=compiler.mode, params=params,
        verdict="Accept" if verdict.accept else "Reject", reason=verdict.reason.value,
        score=float(np.mean(scores)) if scores else None,
        span=transcript.span,
        light_cone_violations=len(check_light_cones(log)),
        informed_cross_talk=len(informed_cross_talk(log, transcript, colluders, compiler.tau)),
        rounds=[r.to_json_dict() for r in transcript.rounds],
        timings=transcript.timings(),
    )


def _run_trial_args(args: Tuple) -> TrialRecord:
    return run_trial(*args)


def run_trials(compiler: CompilerConfig, strat: StrategySpec, seeds: Sequence[int], workers: int = 1,
               params: Optional[Dict[str, Any]] = None, progress: bool = False,
               desc: str = "trials") -> List[TrialRecord]:
    jobs = [(compiler, strat, seed, t, params or {}) for t, seed in enumerate(seeds)]
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(_run_trial_args, jobs, chunksize=max(1, len(jobs) // (4 * workers)))
                return list(tqdm(results, total=len(jobs), desc=desc, disable=not progress))
        return [_run_trial_args(job) for job in tqdm(jobs, desc=desc, disable=not progress)]
    except CVPVError:
        raise
    except Exception as e:
        raise SimulationPanic(f"trial execution failed: {e}") from e


def summarize(records: Sequence[TrialRecord], strat: StrategySpec, mode: str,
              params: Optional[Dict[str, Any]] = None) -> CellReport:
    histogram = {reason: 0 for reason in REASONS}
    for record in records:
        histogram[record.reason] += 1
    scores = [r.score for r in records if r.score is not None]
    return CellReport(
        strategy=strat.kind, mode=mode, params=params or {}, trials=len(records),
        accept_rate=sum(r.accept for r in records) / len(records) if records else 0.0,
        reason_histogram=histogram,
        mean_score=float(np.mean(scores)) if scores else None,
        light_cone_violations=sum(r.light_cone_violations for r in records),
        informed_cross_talk=sum(r.informed_cross_talk for r in records),
        seeds=[r.seed for r in records],
    )


def cell_compiler(config: RunConfig, mode: str, params: Dict[str, Any]) -> CompilerConfig:
    """The compiler config of one sweep cell; without a sweep it is the config's own."""
    if config.sweep is None:
        return config.compiler
    return with_overrides(for_mode(config.compiler, mode), params)


def _cells(config: RunConfig) -> Iterable[Tuple[StrategySpec, CompilerConfig, Dict[str, Any]]]:
    spec = config.sweep
    if spec is None:
        yield config.strategy, config.compiler, {}
        return
    keys = sorted(spec.grid)
    for strat in spec.strategies:
        for mode in spec.modes:
            for values in itertools.product(*(spec.grid[k] for k in keys)):
                params = dict(zip(keys, values))
                yield strat, cell_compiler(config, mode, params), params


def run_campaign(config: Union[str, Path, RunConfig], trials: Optional[int] = None,
                 seed: Optional[str] = None, workers: Optional[int] = None,
                 out_dir: Optional[Union[str, Path]] = None, progress: bool = False,
                 write: bool = True) -> CampaignReport:
    """Run every cell of the config, then write report.json, trials.jsonl and summary.csv."""
    if not isinstance(config, RunConfig):
        config = load_run_config(config)
    update = {k: v for k, v in {"trials": trials, "seed": seed, "workers": workers}.items() if v is not None}
    if update:
        try:
            config = RunConfig.model_validate({**config.model_dump(), **update})
        except ValidationError as e:
            raise ConfigParseError(f"invalid override: {e}") from e

    started = time.perf_counter()
    seeds = trial_seeds(config.master_seed, config.trials)
    logger.info(f"campaign start: {config.trials} trials per cell, master seed {config.seed}",
                extra={"workers": config.workers})
    cells: List[CellReport] = []
    records: List[TrialRecord] = []
    if config.trials > 0:
        for strat, compiler, params in _cells(config):
            cell_records = run_trials(compiler, strat, seeds, config.workers, params, progress,
                                      desc=f"{strat.kind}/{compiler.mode}")
            cell = summarize(cell_records, strat, compiler.mode, params)
            logger.info(f"cell {strat.kind}/{compiler.mode} {params}: accept rate {cell.accept_rate:.3f}",
                        extra={"histogram": cell.reason_histogram})
            cells.append(cell)
            records.extend(cell_records)

    report = CampaignReport(master_seed=config.seed, config=config.model_dump(mode="json", exclude={"out_dir", "workers"}),
                            cells=cells, wall_clock=time.perf_counter() - started)
    if write:
        write_reports(report, records, Path(out_dir or config.out_dir))
    logger.info(f"campaign finished in {report.wall_clock:.2f}s, {report.trials} trials")
    return report


def write_reports(report: CampaignReport, records: Sequence[TrialRecord], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(out_dir / "trials.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.model_dump(mode="json"), sort_keys=True) + "\n")
    summary_table(records).to_csv(out_dir / "summary.csv", index=False)
    logger.debug(f"reports written to {out_dir}")


SUMMARY_COLUMNS = ["trial", "seed", "strategy", "mode", "verdict", "reason", "score", "span"]


def summary_table(records: Sequence[TrialRecord]) -> pd.DataFrame:
    """One line per trial."""
    rows = [{**{c: getattr(r, c) for c in SUMMARY_COLUMNS}, **r.params} for r in records]
    return pd.DataFrame(rows, columns=None if rows else SUMMARY_COLUMNS)


def sweep(strategies: Sequence[Union[str, StrategySpec]], modes: Sequence[str],
          cfg_grid: Dict[str, List[Any]], base: Optional[RunConfig] = None,
          progress: bool = False) -> pd.DataFrame:
    """Accept/reject/reason rates per (strategy, mode, grid point); every row records its seed."""
    base = base or RunConfig()
    specs = [s if isinstance(s, StrategySpec) else StrategySpec(kind=s) for s in strategies]
    config = base.model_copy(update={"sweep": SweepSpec(strategies=specs, modes=list(modes), grid=cfg_grid)})
    report = run_campaign(config, progress=progress, write=False)
    return sweep_table(report)


def sweep_table(report: CampaignReport) -> pd.DataFrame:
    rows = []
    for cell in report.cells:
        rows.append({
            "strategy": cell.strategy, "mode": cell.mode, **cell.params,
            "trials": cell.trials, "accept_rate": cell.accept_rate,
            "reason_histogram": json.dumps(cell.reason_histogram, sort_keys=True),
            "seed": report.master_seed,
        })
    return pd.DataFrame(rows)


def replay(config: Union[str, Path, RunConfig], seed: Union[int, str],
           record: Optional[Union[TrialRecord, Dict[str, Any]]] = None) -> RunOutcome:
    """Re-run one recorded trial (seed as in trials.jsonl) and return its full EventLog.

    Pass the trial's ``record`` to replay a sweep cell: its strategy, mode and
    grid overrides replace the config's base values.
    """
    if not isinstance(config, RunConfig):
        config = load_run_config(config)
    if isinstance(seed, str):
        seed = int(seed, 16)
    compiler, strat = config.compiler, config.strategy
    if record is not None:
        if not isinstance(record, TrialRecord):
            record = TrialRecord.model_validate(record)
        if int(record.seed, 16) != seed:
            raise ConfigInvalid(f"record seed {record.seed} does not match {seed_hex(seed)}")
        strat = StrategySpec(kind=record.strategy, params=record.strategy_params)
        compiler = cell_compiler(config, record.mode, record.params)
    logger.debug(f"replaying {strat.kind}/{compiler.mode} seed {seed_hex(seed)}")
    return run_protocol(compiler, strategy(strat.kind, strat.params), seed=seed)


def read_record(path: Union[str, Path], line: int) -> TrialRecord:
    """Line ``line`` (1-based) of a trials.jsonl file."""
    if line < 1:
        raise ConfigParseError(f"trial record lines start at 1, got {line}")
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return TrialRecord.model_validate_json(lines[line - 1])
    except (OSError, IndexError, ValidationError) as e:
        raise ConfigParseError(f"cannot read trial record {path}:{line}: {e}") from e
