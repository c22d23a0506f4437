"""Tests for campaigns, sweeps, replay and the command line."""
import json
from pathlib import Path
from unittest.mock import patch

import pytest

from main import main
from src.core.campaign import (
    for_mode, load_run_config, replay, run_campaign, sweep, trial_seeds, with_overrides,
)
from src.core.compilers import run_protocol
from src.core.adversaries import strategy
from src.models.campaign import CampaignReport, RunConfig, StrategySpec, SweepSpec
from src.models.cvpv import BackendConfig, CompilerConfig
from src.models.errors import ConfigInvalid, ConfigParseError, SimulationPanic
from src.models.protocol import RCSBackendConfig

GOLDEN = Path(__file__).parent / "testdata" / "golden_report.json"

SMALL_RCS = BackendConfig(kind="rcs", rcs=RCSBackendConfig(n_qubits=4, depth=8, k=50))
FAST_RCS = BackendConfig(kind="rcs", rcs=RCSBackendConfig(n_qubits=6, depth=12, k=200, delta=0.3))


def _config(**kwargs) -> RunConfig:
    defaults = dict(
        compiler=CompilerConfig(mode="sequential", rounds=2, backend=SMALL_RCS),
        trials=5, seed="5eed", workers=1,
    )
    return RunConfig(**{**defaults, **kwargs})


def _write(path: Path, config: RunConfig) -> Path:
    path.write_text(config.model_dump_json(exclude_none=True), encoding="utf-8")
    return path


class TestConfig:
    def test_toml_example_parses(self):
        config = load_run_config("config/campaign-example.toml")
        assert config.compiler.backend.rcs.n_qubits == 8
        assert [s.kind for s in config.sweep.strategies] == ["honest", "precommit-answer", "independent-sample-pair"]

    def test_json_round_trip(self, tmp_path):
        config = _config()
        assert load_run_config(_write(tmp_path / "run.json", config)) == config

    @pytest.mark.parametrize("text", ["{not json", '{"trials": -1}', '{"colour": "blue"}'])
    def test_bad_configs(self, tmp_path, text):
        path = tmp_path / "bad.json"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ConfigParseError):
            load_run_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigParseError):
            load_run_config(tmp_path / "absent.toml")

    def test_seed_must_be_hex(self):
        with pytest.raises(ValueError):
            RunConfig(seed="not-hex")

    def test_dotted_overrides(self):
        compiler = with_overrides(CompilerConfig(), {"backend.rcs.delta": 0.3, "delta_t": 0.1})
        assert compiler.backend.rcs.delta == 0.3
        assert compiler.delta_t == 0.1

    def test_invalid_override(self):
        with pytest.raises(ConfigInvalid):
            with_overrides(CompilerConfig(), {"rounds": 0})

    def test_single_mode_forces_one_round(self):
        compiler = for_mode(CompilerConfig(mode="sequential", rounds=4), "single")
        assert (compiler.mode, compiler.rounds) == ("single", 1)

    def test_trial_seeds_depend_only_on_the_master(self):
        assert trial_seeds(b"\x01", 4) == trial_seeds(b"\x01", 4)
        assert trial_seeds(b"\x01", 4)[:2] == trial_seeds(b"\x01", 2)
        assert trial_seeds(b"\x01", 2) != trial_seeds(b"\x02", 2)


class TestRunCampaign:
    def test_zero_trials(self, tmp_path):
        report = run_campaign(_config(trials=0), out_dir=tmp_path)
        assert report.cells == []
        assert (tmp_path / "trials.jsonl").read_text(encoding="utf-8") == ""
        assert json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))["cells"] == []

    def test_reruns_are_byte_identical(self, tmp_path):
        run_campaign(_config(), out_dir=tmp_path / "a")
        run_campaign(_config(), out_dir=tmp_path / "b")
        for name in ("report.json", "trials.jsonl", "summary.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    @pytest.mark.slow
    def test_workers_do_not_change_results(self, tmp_path):
        run_campaign(_config(), out_dir=tmp_path / "one")
        run_campaign(_config(workers=2), out_dir=tmp_path / "two")
        assert (tmp_path / "one" / "trials.jsonl").read_bytes() == (tmp_path / "two" / "trials.jsonl").read_bytes()

    def test_report_shape(self, tmp_path):
        report = run_campaign(_config(), out_dir=tmp_path)
        (cell,) = report.cells
        assert cell.trials == 5 and len(cell.seeds) == 5
        assert sum(cell.reason_histogram.values()) == 5
        assert 0.0 <= cell.accept_rate <= 1.0
        assert cell.light_cone_violations == 0
        written = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert "wall_clock" not in written
        assert "out_dir" not in written["config"]
        lines = (tmp_path / "trials.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 5
        assert {"seed", "verdict", "reason", "rounds", "timings"} <= json.loads(lines[0]).keys()

    @pytest.mark.slow
    def test_honest_against_precommit(self, tmp_path):
        config = _config(
            compiler=CompilerConfig(mode="single", backend=FAST_RCS), trials=10,
            sweep=SweepSpec(strategies=[StrategySpec(kind="honest"), StrategySpec(kind="precommit-answer")],
                            modes=["single"]),
        )
        rates = {c.strategy: c for c in run_campaign(config, out_dir=tmp_path).cells}
        assert rates["honest"].accept_rate >= 0.9
        assert rates["precommit-answer"].accept_rate == 0.0
        assert rates["precommit-answer"].reason_histogram["CRTest"] == 10

    def test_failures_outside_the_simulator_panic(self, tmp_path):
        with patch("src.core.campaign.run_protocol", side_effect=RuntimeError("boom")):
            with pytest.raises(SimulationPanic):
                run_campaign(_config(), out_dir=tmp_path)

    def test_golden_report(self, tmp_path):
        assert GOLDEN.exists(), f"missing golden report {GOLDEN}"
        config = _config(compiler=CompilerConfig(
            mode="sequential", rounds=2,
            backend=BackendConfig(kind="deterministic-answer", rcs=RCSBackendConfig(depth=12)),
        ))
        run_campaign(config, out_dir=tmp_path)
        produced = (tmp_path / "report.json").read_text(encoding="utf-8")
        assert produced == GOLDEN.read_text(encoding="utf-8")
        report = CampaignReport.model_validate_json(produced)
        assert report.cells[0].seeds == [format(s, "016x") for s in trial_seeds(bytes.fromhex("5eed"), 5)]


class TestSweepAndReplay:
    def test_sweep_grid(self):
        base = _config(compiler=CompilerConfig(mode="rapid-fire", rounds=2, delta_t=0.1,
                                               backend=BackendConfig(kind="deterministic-answer")),
                       trials=2)
        table = sweep(["honest", "uniform-answer", "precommit-answer"], ["single", "rapid-fire"],
                      {"tau": [0.0, 0.1]}, base=base)
        assert len(table) == 12
        assert set(table["strategy"]) == {"honest", "uniform-answer", "precommit-answer"}
        assert (table["seed"] == "5eed").all()
        honest = table[table["strategy"] == "honest"]
        assert (honest["accept_rate"] == 1.0).all()

    def test_replay_reproduces_a_recorded_trial(self, tmp_path):
        config = _config()
        run_campaign(config, out_dir=tmp_path)
        record = json.loads((tmp_path / "trials.jsonl").read_text(encoding="utf-8").splitlines()[3])
        outcome = replay(config, record["seed"])
        assert ("Accept" if outcome.verdict.accept else "Reject") == record["verdict"]
        assert outcome.verdict.reason.value == record["reason"]
        direct = run_protocol(config.compiler, strategy("honest"), seed=int(record["seed"], 16))
        assert outcome.log.to_jsonl() == direct.log.to_jsonl()

    def _sweep_config(self) -> RunConfig:
        return _config(
            compiler=CompilerConfig(mode="rapid-fire", rounds=2, delta_t=0.1,
                                    backend=BackendConfig(kind="deterministic-answer")),
            trials=2,
            sweep=SweepSpec(strategies=[StrategySpec(kind="honest"), StrategySpec(kind="uniform-answer")],
                            modes=["single", "rapid-fire"], grid={"tau": [0.0, 0.1]}),
        )

    def test_replay_applies_the_cell_overrides(self, tmp_path):
        config = self._sweep_config()
        run_campaign(config, out_dir=tmp_path)
        lines = (tmp_path / "trials.jsonl").read_text(encoding="utf-8").splitlines()
        (record,) = [r for r in map(json.loads, lines)
                     if r["strategy"] == "uniform-answer" and r["mode"] == "single"
                     and r["params"] == {"tau": 0.1} and r["trial"] == 1]
        outcome = replay(config, record["seed"], record)
        assert outcome.verdict.reason.value == record["reason"]
        cell = with_overrides(for_mode(config.compiler, "single"), {"tau": 0.1})
        direct = run_protocol(cell, strategy("uniform-answer"), seed=int(record["seed"], 16))
        assert outcome.log.to_jsonl() == direct.log.to_jsonl()
        assert outcome.transcript.mode == "single" and len(outcome.transcript.rounds) == 1

    def test_record_seed_must_match(self, tmp_path):
        config = self._sweep_config()
        run_campaign(config, out_dir=tmp_path)
        first, second = (json.loads(line) for line in
                         (tmp_path / "trials.jsonl").read_text(encoding="utf-8").splitlines()[:2])
        assert first["seed"] != second["seed"]
        with pytest.raises(ConfigInvalid):
            replay(config, first["seed"], second)


class TestCommandLine:
    def test_eat_bound(self, capsys):
        assert main(["bounds", "--n", "100", "--h", "0.5", "--c1", "1", "--c0", "5"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["eat"]["eat_bound"] == pytest.approx(35.0)

    def test_repeated_bound(self, capsys):
        assert main(["bounds", "--p-block", "0.1", "--alpha", "1", "--m", "4"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["success_bounds"]["repeated"] == pytest.approx(5.46e-3, rel=1e-2)

    def test_smooth_and_g(self, capsys):
        assert main(["bounds", "--h-smooth", "10", "--eps", "0.0009765625"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["minentropy_from_smooth"]["value"] == pytest.approx(9.0)
        assert main(["bounds", "--eps", "0.5"]) == 0
        assert "g_correction" in json.loads(capsys.readouterr().out)

    @pytest.mark.parametrize("argv", [
        ["bounds"],
        ["bounds", "--n", "100"],
        ["bounds", "--p-block", "0.1", "--m", "4"],
        ["bounds", "--h-smooth", "3"],
    ])
    def test_incomplete_flags(self, argv, capsys):
        assert main(argv) == 2
        assert "usage" in capsys.readouterr().err

    def test_out_of_domain_bound(self):
        assert main(["bounds", "--eps", "1.5"]) == 2

    def test_run_writes_reports(self, tmp_path):
        path = _write(tmp_path / "run.json", _config())
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "out"), "--quiet",
                     "--trials", "2"]) == 0
        assert len((tmp_path / "out" / "trials.jsonl").read_text(encoding="utf-8").splitlines()) == 2
        assert (tmp_path / "out" / "summary.csv").exists()

    def test_run_with_a_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2

    def test_run_with_a_bad_seed(self, tmp_path):
        path = _write(tmp_path / "run.json", _config())
        assert main(["run", "--config", str(path), "--seed", "xyz", "--out", str(tmp_path)]) == 2

    def test_panic_exits_three(self, tmp_path):
        path = _write(tmp_path / "run.json", _config())
        with patch("src.core.campaign.run_campaign", side_effect=SimulationPanic("worker died")):
            assert main(["run", "--config", str(path)]) == 3

    def test_sweep_writes_a_table(self, tmp_path):
        config = _config(trials=1, sweep=SweepSpec(strategies=[StrategySpec(kind="honest")],
                                                   modes=["single", "sequential"]))
        path = _write(tmp_path / "run.json", config)
        assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "out"), "--quiet"]) == 0
        assert len((tmp_path / "out" / "sweep.csv").read_text(encoding="utf-8").splitlines()) == 3

    def test_replay_writes_events(self, tmp_path):
        config = _config()
        path = _write(tmp_path / "run.json", config)
        seed = format(trial_seeds(config.master_seed, 1)[0], "016x")
        assert main(["replay", seed, "--config", str(path), "--out", str(tmp_path / "replay")]) == 0
        events = (tmp_path / "replay" / "events.jsonl").read_text(encoding="utf-8").splitlines()
        assert events and all(json.loads(e)["kind"] in ("share", "answer") for e in events)

    def test_replay_a_sweep_cell_from_its_record(self, tmp_path, capsys):
        config = TestSweepAndReplay()._sweep_config()
        path = _write(tmp_path / "run.json", config)
        run_campaign(config, out_dir=tmp_path / "run")
        trials = tmp_path / "run" / "trials.jsonl"
        record = json.loads(trials.read_text(encoding="utf-8").splitlines()[-1])
        assert (record["strategy"], record["mode"]) == ("uniform-answer", "rapid-fire")
        count = len(trials.read_text(encoding="utf-8").splitlines())
        capsys.readouterr()
        assert main(["replay", record["seed"], "--config", str(path), "--record", str(trials),
                     "--line", str(count), "--out", str(tmp_path / "replay")]) == 0
        assert json.loads(capsys.readouterr().err.splitlines()[-1])["reason"] == record["reason"]

    def test_replay_with_a_missing_record_line(self, tmp_path):
        config = TestSweepAndReplay()._sweep_config()
        path = _write(tmp_path / "run.json", config)
        run_campaign(config, out_dir=tmp_path / "run")
        trials = tmp_path / "run" / "trials.jsonl"
        seed = json.loads(trials.read_text(encoding="utf-8").splitlines()[0])["seed"]
        assert main(["replay", seed, "--config", str(path), "--record", str(trials), "--line", "999"]) == 2

    def test_serve_hands_the_app_to_uvicorn(self):
        with patch("uvicorn.run") as run:
            assert main(["serve", "--port", "9000"]) == 0
        assert run.call_args[0][0] == "src.api.main:app"
        assert run.call_args[1]["port"] == 9000
