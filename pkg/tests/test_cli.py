import json

import pytest

from corrlab.cli import main
from corrlab.experiments import (
    ConfigError,
    ExperimentConfig,
    config_from_mapping,
    load_config,
    load_defaults,
    read_records,
    report,
    run,
    write_record,
)


def records(path):
    return [json.loads(line) for line in (path / "records.jsonl").read_text().splitlines()]


def fake_record(h, N, ys, label="syn"):
    return {
        "config_hash": h,
        "label": label,
        "kind": "correlate",
        "check": "trend",
        "passed": True,
        "runtime_s": 0.0,
        "series": {"series": {"N": N, "deviation": ys}},
    }


class TestConfig:
    def test_defaults_file(self):
        d = load_defaults()
        assert d["delta"] == 0.1 and d["epsilon"] == 0.05
        assert d["version"] == 1

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[experiment]\nkind = moments\nm = 1\nthetta = 0.3\n")
        with pytest.raises(ConfigError, match="thetta"):
            load_config(p)

    def test_unknown_section_rejected(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[experiment]\nkind = moments\n[extra]\nx = 1\n")
        with pytest.raises(ConfigError, match="extra"):
            load_config(p)

    def test_missing_kind(self):
        with pytest.raises(ConfigError, match="kind"):
            config_from_mapping({"m": "3"})

    @pytest.mark.parametrize(
        "values",
        [
            {"kind": "correlate", "theta": "1.0"},
            {"kind": "correlate", "m": "9"},
            {"kind": "correlate", "m": "1"},
            {"kind": "correlate", "N": "20000000"},
            {"kind": "correlate", "check": "value"},
            {"kind": "plot"},
            {"kind": "moments", "N": "ten"},
        ],
    )
    def test_invariants(self, values):
        with pytest.raises(ConfigError):
            config_from_mapping(values)

    def test_n_list_and_case(self):
        cfg = config_from_mapping({"KIND": "moments", "n": "1e3, 1e4", "M": "1"})
        assert cfg.N == (1000, 10_000)
        assert cfg.check == "value"

    def test_hash_ignores_output_dir(self):
        a = ExperimentConfig("moments", m=1, out="x")
        b = ExperimentConfig("moments", m=1, out="y")
        assert a.hash() == b.hash()
        assert a.hash() != ExperimentConfig("moments", m=2).hash()


class TestRun:
    def test_first_moment(self, tmp_path):
        rec = run(ExperimentConfig("moments", m=1, N=(1000,)))
        assert rec["passed"]
        assert abs(rec["scalars"]["final_value"] - 0.75) < 1e-10
        assert rec["defaults"] == load_defaults()

    def test_partition_identity(self):
        rec = run(ExperimentConfig("identity-check", check="partition", m=3, N=(50,), grid_log2=14))
        assert rec["passed"], rec

    def test_deterministic_scalars(self):
        cfg = ExperimentConfig("offdiag", check="vandermonde", samples=20, seed=4)
        assert run(cfg)["scalars"] == run(cfg)["scalars"]

    def test_failure_recorded_not_raised(self):
        """A support-radius violation inside a module lands in the record."""
        rec = run(ExperimentConfig("correlate", m=2, N=(10,), radius=50.0))
        assert not rec["passed"]
        assert rec["error"].startswith("ValueError")

    def test_write_record_sidecars(self, tmp_path):
        rec = run(ExperimentConfig("moments", m=1, N=(100, 200)))
        write_record(rec, tmp_path)
        write_record(rec, tmp_path)
        lines = records(tmp_path)
        assert len(lines) == 2
        assert "arrays" not in lines[0]
        side = tmp_path / lines[0]["sidecars"]["series"]
        assert side.read_text().splitlines()[0].startswith("N,")
        assert len(side.read_text().splitlines()) == 3


class TestReport:
    def test_synthetic_power_law(self):
        N = [1000, 10_000, 100_000]
        md, rows = report([fake_record("a", N, [n**-0.15 for n in N])])
        assert rows[0]["slope"] == pytest.approx(-0.15, abs=1e-6)
        assert "syn" in md

    def test_dedupe_by_hash(self):
        N = [10, 100]
        md, rows = report([fake_record("a", N, [1.0, 0.1]), fake_record("a", N, [1.0, 0.01])])
        assert len(rows) == 1
        assert rows[0]["slope"] == pytest.approx(-2.0)
        assert md.count("| syn |") == 1

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            report([fake_record("a", [], [])])

    def test_no_records(self):
        with pytest.raises(ValueError):
            report([])


class TestMain:
    def test_moments_exit_zero(self, tmp_path, capsys):
        assert main(["moments", "--m", "1", "--out", str(tmp_path)]) == 0
        assert capsys.readouterr().out.startswith("PASS moments/value")
        assert records(tmp_path)[0]["config"]["m"] == 1

    def test_config_file_with_override(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[experiment]\nkind = moments\nm = 1\nN = 500\nlabel = base\n")
        assert main(["moments", "--config", str(p), "--N", "300", "--out", str(tmp_path)]) == 0
        rec = records(tmp_path)[0]
        assert rec["config"]["N"] == [300]
        assert rec["label"] == "base"

    def test_kind_mismatch(self, tmp_path, capsys):
        p = tmp_path / "c.ini"
        p.write_text("[experiment]\nkind = moments\nm = 1\n")
        assert main(["correlate", "--config", str(p), "--out", str(tmp_path)]) == 2
        assert "does not match" in capsys.readouterr().err

    def test_bad_config_exit_two(self, tmp_path):
        assert main(["moments", "--theta", "1.5", "--out", str(tmp_path)]) == 2
        assert main(["moments", "--config", str(tmp_path / "missing.ini")]) == 2

    def test_failed_certificate_exit_one(self, tmp_path):
        assert main(["correlate", "--m", "2", "--N", "10", "--radius", "50", "--out", str(tmp_path)]) == 1

    def test_report_command(self, tmp_path, capsys):
        main(["moments", "--m", "1", "--N", "100,200", "--out", str(tmp_path)])
        main(["moments", "--m", "1", "--N", "100,200", "--out", str(tmp_path)])
        capsys.readouterr()
        assert main(["report", str(tmp_path / "records.jsonl"), "--out", str(tmp_path / "rep")]) == 0
        md = capsys.readouterr().out
        assert len([l for l in md.splitlines() if l.startswith("| ") and "moments" in l]) == 1
        assert (tmp_path / "rep" / "report.md").read_text() == md
        assert (tmp_path / "rep" / "slopes.csv").exists()
        assert len(read_records([tmp_path / "records.jsonl"])) == 2

    def test_report_rejects_empty_series(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text(json.dumps(fake_record("a", [], [])) + "\n")
        assert main(["report", str(path)]) == 2
