"""CLI commands end to end, in process."""

import json

from zeromiss.cli import EXIT_CONVERGENCE, EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from zeromiss.store import RunStore


def read_config(path):
    return json.loads(path.read_text())


class TestGenerate:
    def test_writes_cohort_csv(self, small_config_path, tmp_path, capsys):
        out = tmp_path / "cohort.csv"
        code = main(["generate", "--config", str(small_config_path), "--out", str(out)])
        assert code == EXIT_OK
        assert out.exists()
        assert "240 rows (24 abnormal)" in capsys.readouterr().out
        header = out.read_text().splitlines()[0]
        assert header == "origin_id,bg,trigger,n1,n2,label"

    def test_deterministic_output(self, small_config_path, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["generate", "--config", str(small_config_path), "--out", str(a)]) == EXIT_OK
        assert main(["generate", "--config", str(small_config_path), "--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override_changes_output(self, small_config_path, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["generate", "--config", str(small_config_path), "--out", str(a)])
        main(["generate", "--config", str(small_config_path), "--seed", "99",
              "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()


class TestTrain:
    def test_train_records_run(self, small_config_path, tmp_path, capsys):
        out = tmp_path / "summary.json"
        code = main(["train", "--config", str(small_config_path), "--out", str(out)])
        assert code == EXIT_OK
        summary = json.loads(out.read_text())
        assert summary["calibration"]["post"]["fn"] == 0
        assert summary["calibration"]["post"]["sensitivity"] in (None, 1.0)
        store = RunStore(read_config(small_config_path)["store"])
        records = store.list()
        assert len(records) == 1
        assert records[0].kind == "train"
        assert records[0].results["threshold"] == summary["threshold"]
        # model bundle stored alongside
        assert store.load_bundle(records[0].run_id).threshold == summary["threshold"]

    def test_missing_schema_is_a_data_error(self, small_config_path, tmp_path, capsys):
        raw = read_config(small_config_path)
        raw["schema"] = str(tmp_path / "ghost.json")
        raw["cohort_csv"] = str(tmp_path / "ghost.csv")
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(raw))
        code = main(["train", "--config", str(bad)])
        assert code == EXIT_DATA
        assert "not found" in capsys.readouterr().err

    def test_nonconvergence_is_soft_failure(self, small_config_path, tmp_path, capsys):
        raw = read_config(small_config_path)
        raw["pipeline"].update(max_epochs=2, tol=1e-16)
        cfg = tmp_path / "hard.json"
        cfg.write_text(json.dumps(raw))
        code = main(["train", "--config", str(cfg)])
        assert code == EXIT_CONVERGENCE
        assert "did not converge" in capsys.readouterr().err
        # the run is still persisted without --strict
        assert len(RunStore(raw["store"]).list()) == 1

    def test_strict_blocks_persistence(self, small_config_path, tmp_path):
        raw = read_config(small_config_path)
        raw["pipeline"].update(max_epochs=2, tol=1e-16)
        raw["store"] = str(tmp_path / "strict-store")
        cfg = tmp_path / "hard.json"
        cfg.write_text(json.dumps(raw))
        code = main(["train", "--config", str(cfg), "--strict"])
        assert code == EXIT_CONVERGENCE
        assert RunStore(raw["store"]).list() == []


class TestSelect:
    def test_cost_mode_report(self, small_config_path, tmp_path, capsys):
        out = tmp_path / "options.csv"
        code = main(["select", "--config", str(small_config_path),
                     "--mode", "cost", "--budget", "200", "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 3  # header + C(3,2) maximal pairs
        assert "best:" in capsys.readouterr().out
        store = RunStore(read_config(small_config_path)["store"])
        record = store.list()[-1]
        assert record.kind == "select"
        options = record.results["options"]
        fas = [o["result"]["fa"] for o in options]
        assert fas == sorted(fas)

    def test_usage_error_without_budget(self, small_config_path, capsys):
        code = main(["select", "--config", str(small_config_path), "--mode", "cost"])
        assert code == EXIT_USAGE
        assert "usage error" in capsys.readouterr().err

    def test_unknown_command_is_usage_error(self):
        assert main(["defragment"]) == EXIT_USAGE


class TestSweep:
    def test_sweep_writes_curve(self, small_config_path, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--config", str(small_config_path), "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 4  # header + k=0..3 over the three BCT columns
        store = RunStore(read_config(small_config_path)["store"])
        points = store.list()[-1].results["points"]
        assert all(p["sensitivity_post"] in (None, 1.0) for p in points)

    def test_explicit_order(self, small_config_path, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--config", str(small_config_path),
                     "--order", "n1,n2", "--out", str(out)])
        assert code == EXIT_OK
        assert len(out.read_text().strip().splitlines()) == 1 + 3


class TestReplay:
    def test_rerunning_a_recorded_config_reproduces_results(self, small_config_path,
                                                            tmp_path):
        assert main(["train", "--config", str(small_config_path)]) == EXIT_OK
        store = RunStore(read_config(small_config_path)["store"])
        first = store.list()[0]

        replay_cfg = tmp_path / "replay.json"
        snapshot = dict(first.config)
        snapshot["store"] = str(tmp_path / "replay-store")
        replay_cfg.write_text(json.dumps(snapshot))
        assert main(["train", "--config", str(replay_cfg)]) == EXIT_OK
        second = RunStore(snapshot["store"]).list()[0]
        assert second.results == first.results
