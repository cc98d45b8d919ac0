"""End-to-end CLI behavior: artifacts, exit codes, config resolution.

Runs use a 5^3 grid with rank-4 networks so each solve finishes in well
under a second while still exercising the full artifact pipeline.
"""

import json
import os

import numpy as np
import pytest

from sepelast.cli import main
from sepelast.models import save_checkpoint
from sepelast.problems import beam_problem
from sepelast.training import RunSettings, build_objective, read_metrics

FAST = [
    "--grid", "5,5,5", "--rank", "4", "--hidden", "8,8",
    "--epochs", "4", "--eval-every", "2",
]


def _solve(out, *extra):
    argv = ["solve", "--problem", "beam", "--mode", "spinn-dem", "--out", str(out)]
    argv += FAST + list(extra)
    return main(argv)


class TestSolve:
    def test_artifacts_and_exit_code(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert _solve(out, "--seeds", "0,1") == 0
        for name in ("config.json", "report.txt", "report.csv"):
            assert (out / name).is_file()
        for seed in (0, 1):
            d = out / f"seed-{seed}"
            for name in (
                "metrics.ndjson", "timing.ndjson", "checkpoint.bin", "prediction.csv",
            ):
                assert (d / name).is_file()
            assert not (d / "aborted.txt").exists()
        cfg = json.loads((out / "config.json").read_text())
        assert cfg["seeds"] == [0, 1] and cfg["jobs"] == 1
        assert cfg["grid"] == [5, 5, 5] and cfg["mode"] == "spinn-dem"
        text = capsys.readouterr().out
        assert "summary for beam [spinn-dem]" in text
        assert "seeds: 2" in text

    def test_deterministic_artifacts(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert _solve(a) == 0 and _solve(b) == 0
        for name in ("seed-0/metrics.ndjson", "seed-0/prediction.csv",
                     "seed-0/checkpoint.bin"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_parallel_jobs(self, tmp_path):
        out = tmp_path / "run"
        assert _solve(out, "--seeds", "0,1", "--jobs", "2") == 0
        assert (out / "seed-0" / "metrics.ndjson").is_file()
        assert (out / "seed-1" / "metrics.ndjson").is_file()

    def test_parallel_matches_sequential(self, tmp_path):
        seq, par = tmp_path / "seq", tmp_path / "par"
        assert _solve(seq, "--seeds", "0,1") == 0
        assert _solve(par, "--seeds", "0,1", "--jobs", "2") == 0
        for seed in (0, 1):
            assert (seq / f"seed-{seed}" / "metrics.ndjson").read_bytes() == (
                par / f"seed-{seed}" / "metrics.ndjson"
            ).read_bytes()

    def test_abort_exit_code_and_partials(self, tmp_path, capsys):
        out = tmp_path / "run"
        with np.errstate(all="ignore"):
            code = _solve(out, "--lr", "1e200", "--epochs", "10")
        assert code == 3
        d = out / "seed-0"
        assert (d / "aborted.txt").read_text().strip() != ""
        assert (d / "metrics.ndjson").is_file()
        assert (d / "checkpoint.bin").is_file()
        assert "aborted" in capsys.readouterr().err

    def test_default_out_directory(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        argv = ["solve", "--problem", "beam", "--mode", "spinn-dem"] + FAST
        assert main(argv) == 0
        assert (tmp_path / "runs" / "beam-spinn-dem" / "report.txt").is_file()

    def test_reference_scoring(self, tmp_path):
        first = tmp_path / "first"
        assert _solve(first) == 0
        second = tmp_path / "second"
        code = _solve(
            second, "--reference", str(first / "seed-0" / "prediction.csv")
        )
        assert code == 0
        recs = read_metrics(second / "seed-0" / "metrics.ndjson")
        last = recs[-1].errors
        # same seed and settings against its own exported field: ~0 error
        for q in ("ux", "uy", "uz", "um", "svm"):
            assert last[q] is not None and last[q] < 1e-8

    def test_bad_reference_fails_before_training(self, tmp_path, capsys):
        out = tmp_path / "run"
        ref = tmp_path / "outside.csv"
        ref.write_text("2.0,0.0,0.0,1.0,2.0,3.0\n")
        assert _solve(out, "--reference", str(ref)) == 2
        assert not (out / "seed-0").exists()
        err = capsys.readouterr().err
        assert err.startswith("error:") and "outside" in err

    def test_missing_reference_file(self, tmp_path, capsys):
        assert _solve(tmp_path / "run", "--reference", "/nonexistent.csv") == 2
        assert capsys.readouterr().err.startswith("error:")


class TestConfigResolution:
    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "problem": "beam", "mode": "spinn-dem", "epochs": 4,
            "grid": [5, 5, 5], "rank": 4, "hidden": [8, 8], "eval_every": 2,
            "out": str(tmp_path / "run"),
        }))
        assert main(["solve", "--config", str(cfg)]) == 0
        echoed = json.loads((tmp_path / "run" / "config.json").read_text())
        assert echoed["epochs"] == 4 and echoed["rank"] == 4

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "problem": "beam", "mode": "spinn-dem", "epochs": 9999,
            "grid": [5, 5, 5], "rank": 4, "hidden": [8, 8],
        }))
        out = tmp_path / "run"
        code = main([
            "solve", "--config", str(cfg), "--epochs", "2",
            "--eval-every", "1", "--out", str(out),
        ])
        assert code == 0
        echoed = json.loads((out / "config.json").read_text())
        assert echoed["epochs"] == 2

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"problem": "beam", "mode": "spinn-dem", "lrr": 1}))
        assert main(["solve", "--config", str(cfg)]) == 2
        assert "unknown config keys: lrr" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert main(["solve", "--config", str(cfg)]) == 2
        assert "bad config file" in capsys.readouterr().err

    def test_required_problem_and_mode(self, capsys):
        assert main(["solve", "--mode", "spinn-dem"]) == 2
        assert "--problem is required" in capsys.readouterr().err
        assert main(["solve", "--problem", "beam"]) == 2
        assert "--mode is required" in capsys.readouterr().err

    def test_bad_mode_from_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"problem": "beam", "mode": "energy"}))
        assert main(["solve", "--config", str(cfg)]) == 2
        assert "unknown mode" in capsys.readouterr().err

    def test_argparse_rejects_bad_choice(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--problem", "plate", "--mode", "spinn-dem"])
        assert exc.value.code == 2

    def test_jobs_validation(self, tmp_path, capsys):
        assert _solve(tmp_path / "run", "--jobs", "0") == 2
        assert "--jobs" in capsys.readouterr().err

    def test_per_box_grid_string(self):
        from sepelast.cli import _parse_grid

        assert _parse_grid("33,33,33") == (33, 33, 33)
        assert _parse_grid("129,9,33;129,33,9") == ((129, 9, 33), (129, 33, 9))
        assert _parse_grid([[5, 5, 5], [7, 7, 7]]) == ((5, 5, 5), (7, 7, 7))
        assert _parse_grid(None) is None


class TestEvaluate:
    def test_matches_training_evaluator_exactly(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert _solve(out) == 0
        capsys.readouterr()
        code = main(["evaluate", "--checkpoint", str(out / "seed-0" / "checkpoint.bin")])
        assert code == 0
        text = capsys.readouterr().out
        shown = {}
        for line in text.splitlines():
            q = line.split("[")[1].split("]")[0]
            value = line.split("=")[1].strip()
            shown[q] = value
        assert shown["ux"] == "---" and shown["svm"] == "---"
        recs = read_metrics(out / "seed-0" / "metrics.ndjson")
        stored = recs[-1].errors["uz"]
        assert float(shown["uz"]) == stored

    def test_evaluation_csv(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert _solve(out) == 0
        code = main([
            "evaluate", "--checkpoint", str(out / "seed-0" / "checkpoint.bin"),
            "--out", str(tmp_path / "ev"),
        ])
        assert code == 0
        lines = (tmp_path / "ev" / "evaluation.csv").read_text().splitlines()
        assert lines[0] == "quantity,l2"
        cells = dict(l.split(",", 1) for l in lines[1:])
        assert cells["ux"] == ""
        recs = read_metrics(out / "seed-0" / "metrics.ndjson")
        assert float(cells["uz"]) == recs[-1].errors["uz"]

    def test_with_reference(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert _solve(out) == 0
        capsys.readouterr()
        code = main([
            "evaluate",
            "--checkpoint", str(out / "seed-0" / "checkpoint.bin"),
            "--reference", str(out / "seed-0" / "prediction.csv"),
        ])
        assert code == 0
        text = capsys.readouterr().out
        for line in text.splitlines():
            value = float(line.split("=")[1])
            assert value < 1e-8

    def test_checkpoint_without_problem_name(self, tmp_path, capsys):
        p = beam_problem()
        obj = build_objective(
            p, RunSettings(mode="spinn-dem", grid=(5, 5, 5), rank=4, hidden=(8, 8))
        )
        path = tmp_path / "anon.bin"
        save_checkpoint(path, obj.bundle, obj.init_params(0), {"mode": "spinn-dem"})
        assert main(["evaluate", "--checkpoint", str(path)]) == 2
        assert "no problem name" in capsys.readouterr().err
        assert main(["evaluate", "--checkpoint", str(path), "--problem", "beam"]) == 0

    def test_checkpoint_without_mode(self, tmp_path, capsys):
        p = beam_problem()
        obj = build_objective(
            p, RunSettings(mode="spinn-dem", grid=(5, 5, 5), rank=4, hidden=(8, 8))
        )
        path = tmp_path / "anon.bin"
        save_checkpoint(path, obj.bundle, obj.init_params(0), {"problem": "beam"})
        assert main(["evaluate", "--checkpoint", str(path)]) == 2
        assert "no usable mode" in capsys.readouterr().err

    def test_missing_checkpoint(self, capsys):
        assert main(["evaluate", "--checkpoint", "/nonexistent.bin"]) == 2
        assert capsys.readouterr().err.startswith("error:")


class TestReport:
    def test_regenerates_tables(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert _solve(out, "--seeds", "0,1") == 0
        (out / "report.txt").unlink()
        (out / "report.csv").unlink()
        capsys.readouterr()
        assert main(["report", "--out", str(out)]) == 0
        assert (out / "report.txt").is_file() and (out / "report.csv").is_file()
        text = capsys.readouterr().out
        assert "summary for beam [spinn-dem]" in text

    def test_empty_directory(self, tmp_path, capsys):
        assert main(["report", "--out", str(tmp_path)]) == 2
        assert "no seed-" in capsys.readouterr().err


class TestSelftest:
    def test_clean_pass(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert out.count("pass") >= 3 and "FAIL" not in out

    def test_injected_fault_detected(self, capsys):
        code = main(["selftest", "--fault", "perturb-quadrature"])
        assert code >= 1
        assert "FAIL" in capsys.readouterr().out

    def test_unknown_fault(self, capsys):
        assert main(["selftest", "--fault", "bogus"]) == 2
        assert capsys.readouterr().err.startswith("error:")
