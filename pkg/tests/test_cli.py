import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from inference_energy.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from inference_energy.config import ConfigError, parse_config
from inference_energy.scenario import SampleSet, summarize

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
seed: 11
n_samples: 2000
scenarios:
- name: trad
  models: [DeepSeek-R1, Llama 3.1 405B, Llama-3.1 Nemotron Ultra 253B]
- name: tts
  models: [DeepSeek-R1, Llama 3.1 405B, Llama-3.1 Nemotron Ultra 253B]
  workload: {regime_name: test_time, l_out_median: 5000}
fleet:
  beta: 1.33
  entries:
  - name: mixed
    parts:
    - {scenario: trad, weight: 0.9}
    - {scenario: tts, weight: 0.1}
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(SMALL)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestFit:
    def test_single_model(self, capsys):
        code, out, _ = run(capsys, "fit", "--model", "DeepSeek-R1")
        assert code == EXIT_OK
        (m,) = json.loads(out)["models"]
        assert m["model_name"] == "DeepSeek-R1" and m["n_obs"] == 3 and m["method"] == "ols"

    def test_all_models(self, capsys):
        code, out, _ = run(capsys, "fit")
        assert code == EXIT_OK
        assert len(json.loads(out)["models"]) == 5

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "fit", "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == EXIT_OK and len(rows) == 5
        assert float(rows[0]["tps_cap"]) > 0

    def test_min_norm_option(self, capsys):
        _, out, _ = run(capsys, "fit", "--model", "Llama-3.1 Nemotron Ultra 253B", "--underdetermined", "min_norm")
        assert json.loads(out)["models"][0]["method"] == "min_norm"

    def test_missing_file(self, capsys, tmp_path):
        code, out, err = run(capsys, "fit", "--benchmarks", tmp_path / "nope.csv")
        assert code == EXIT_DATA and out == "" and "nope.csv" in err

    def test_malformed_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("model,tp_size,quantization,tps,input_length,output_length,source\nX,8,FP8,fast,1,1,s\n")
        code, out, err = run(capsys, "fit", "--benchmarks", bad)
        assert code == EXIT_DATA and out == ""
        assert "row 2" in err and "tps" in err

    def test_unknown_model(self, capsys):
        code, out, err = run(capsys, "fit", "--model", "GPT-9")
        assert code == EXIT_DATA and out == "" and "GPT-9" in err

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "models.json"
        code, out, _ = run(capsys, "fit", "--out", target)
        assert code == EXIT_OK and out == ""
        assert len(json.loads(target.read_text())["models"]) == 5


class TestSimulate:
    def test_minimal_run(self, capsys, tmp_path):
        cfg = tmp_path / "one.yaml"
        cfg.write_text("n_samples: 1\nscenarios:\n- {name: one, models: [Mixtral 8x22B]}\n")
        code, out, _ = run(capsys, "simulate", "--config", cfg)
        assert code == EXIT_OK
        pooled = json.loads(out)["scenarios"]["one"]["pooled"]
        assert pooled["n"] == 1 and pooled["p5_wh"] == pooled["p95_wh"] > 0

    def test_summaries_rederive_from_samples(self, capsys, small_config, tmp_path):
        samples = tmp_path / "s.csv"
        hist = tmp_path / "h.csv"
        code, out, _ = run(capsys, "simulate", "--config", small_config, "--samples-out", samples, "--histogram-out", hist)
        assert code == EXIT_OK
        doc = json.loads(out)["scenarios"]
        for name in ("trad", "tts"):
            back = SampleSet.from_csv((tmp_path / f"s.{name}.csv").read_text())
            assert len(back) == 2000
            again = summarize(back).as_dict()
            for key, value in doc[name]["pooled"].items():
                assert again[key] == pytest.approx(value, rel=1e-9)
            rows = list(csv.reader(io.StringIO((tmp_path / f"h.{name}.csv").read_text())))
            assert len(rows) == 51
            assert sum(int(r[-1]) for r in rows[1:]) <= 2000

    def test_member_summaries(self, capsys, small_config):
        _, out, _ = run(capsys, "simulate", "--config", small_config)
        members = json.loads(out)["scenarios"]["trad"]["members"]
        assert set(members) == {"DeepSeek-R1", "Llama 3.1 405B", "Llama-3.1 Nemotron Ultra 253B"}
        assert sum(m["n"] for m in members.values()) == 2000

    def test_workers_flag_does_not_change_output(self, capsys, small_config):
        _, a, _ = run(capsys, "simulate", "--config", small_config)
        _, b, _ = run(capsys, "simulate", "--config", small_config, "--workers", 3)
        assert a == b

    def test_unknown_model_in_scenario(self, capsys, tmp_path):
        cfg = tmp_path / "x.yaml"
        cfg.write_text("scenarios:\n- {name: one, models: [GPT-9]}\n")
        code, out, err = run(capsys, "simulate", "--config", cfg)
        assert code == EXIT_DATA and out == "" and "GPT-9" in err


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as info:
            parse_config("seed: 1\nsamples: 5\n")
        assert any("samples" in e for e in info.value.errors)

    def test_every_bad_field_reported(self):
        text = "seed: -1\nn_samples: 0\nscenarios:\n- {name: a, models: [X], pue: {p5: 0.5}}\n"
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        where = " ".join(info.value.errors)
        assert "seed" in where and "n_samples" in where and "pue.p5" in where
        assert len(info.value.errors) == 3

    def test_cross_references(self):
        text = "scenarios:\n- {name: a, models: [X]}\nfleet:\n  entries:\n  - name: f\n    parts: [{scenario: b, weight: 1}]\n"
        with pytest.raises(ConfigError, match="unknown scenario"):
            parse_config(text)

    def test_weights_must_sum_to_one(self):
        text = "scenarios:\n- {name: a, models: [X]}\nfleet:\n  entries:\n  - name: f\n    parts: [{scenario: a, weight: 0.5}]\n"
        with pytest.raises(ConfigError, match="sum to 1"):
            parse_config(text)

    def test_missing_benchmark_file(self, tmp_path):
        with pytest.raises(ConfigError, match="file not found"):
            parse_config("benchmark_path: gone.csv\n", base_dir=tmp_path)

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
    def test_echo_round_trip(self, capsys, tmp_path, name):
        code, out, _ = run(capsys, "config", "--config", CONFIGS / name)
        assert code == EXIT_OK
        echoed = tmp_path / "echo.yaml"
        echoed.write_text(out)
        _, again, _ = run(capsys, "config", "--config", echoed)
        assert again == out
        assert yaml.safe_load(out)["seed"] == 2025

    def test_bad_config_exit_code(self, capsys, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("n_samples: many\n")
        code, out, err = run(capsys, "simulate", "--config", cfg)
        assert code == EXIT_USAGE and out == "" and "n_samples" in err


class TestFleet:
    def test_fleet_from_scenarios(self, capsys, small_config):
        code, out, _ = run(capsys, "fleet", "--config", small_config)
        (entry,) = json.loads(out)["fleet"]
        assert code == EXIT_OK and entry["beta"] == 1.33
        assert entry["gwh_per_day"] == pytest.approx(entry["mean_wh_per_query"] * 1.33, rel=1e-12)

    def test_fleet_from_sample_files(self, capsys, small_config, tmp_path):
        run(capsys, "simulate", "--config", small_config, "--samples-out", tmp_path / "s.csv")
        cfg = tmp_path / "files.yaml"
        cfg.write_text(
            "seed: 11\nfleet:\n  beta: 1.33\n  entries:\n  - name: mixed\n    parts:\n"
            "    - {samples_csv: s.trad.csv, weight: 0.9}\n    - {samples_csv: s.tts.csv, weight: 0.1}\n"
        )
        code, out, _ = run(capsys, "fleet", "--config", cfg)
        assert code == EXIT_OK
        _, direct, _ = run(capsys, "fleet", "--config", small_config)
        from_files = json.loads(out)["fleet"][0]["gwh_per_day"]
        assert from_files == pytest.approx(json.loads(direct)["fleet"][0]["gwh_per_day"], rel=1e-12)

    def test_no_entries(self, capsys, tmp_path):
        cfg = tmp_path / "none.yaml"
        cfg.write_text("scenarios:\n- {name: a, models: [Mixtral 8x22B]}\n")
        code, out, _ = run(capsys, "fleet", "--config", cfg)
        assert code == EXIT_USAGE and out == ""


class TestReport:
    def test_byte_identical(self, capsys, small_config):
        _, a, _ = run(capsys, "report", "--config", small_config)
        _, b, _ = run(capsys, "report", "--config", small_config, "--workers", 4)
        assert a == b
        doc = json.loads(a)
        assert doc["seed"] == 11 and len(doc["models"]) == 5
        assert set(doc) == {"seed", "models", "scenarios", "beta", "fleet"}

    def test_seed_override(self, capsys, small_config):
        _, a, _ = run(capsys, "report", "--config", small_config)
        _, b, _ = run(capsys, "report", "--config", small_config, "--seed", 12)
        assert json.loads(b)["seed"] == 12
        assert json.loads(a)["scenarios"] != json.loads(b)["scenarios"]

    def test_csv_sections(self, capsys, small_config):
        _, out, _ = run(capsys, "report", "--config", small_config, "--format", "csv")
        assert [line for line in out.splitlines() if line.startswith("#")] == ["# models", "# scenarios", "# fleet"]

    def test_usage_errors(self, capsys, small_config):
        assert run(capsys, "report", "--config", small_config, "--seed", -1)[0] == EXIT_USAGE
        assert run(capsys, "report", "--config", small_config, "--workers", 0)[0] == EXIT_USAGE
        with pytest.raises(SystemExit) as info:
            main(["report"])
        assert info.value.code == EXIT_USAGE
        with pytest.raises(SystemExit) as info:
            main(["bogus"])
        assert info.value.code == EXIT_USAGE


def test_module_entry_point(small_config):
    done = subprocess.run([sys.executable, "-m", "inference_energy.cli", "fit", "--model", "DeepSeek-R1"],
                          capture_output=True, text=True, check=True)
    assert json.loads(done.stdout)["models"][0]["n_obs"] == 3
