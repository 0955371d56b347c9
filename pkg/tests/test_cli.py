"""Driver contract: exit codes, bundle layout, determinism, validation."""

import json

import pytest

from kslab.cli import ConfigError, load_config, main


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = {
        "space": {"kind": "interval_grid", "n": 401},
        "d_w": 2.0,
        "seed": 0,
        "suite": "doubling",
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestLoadConfig:
    def test_normalizes_defaults(self, tmp_path):
        path = write_config(tmp_path)
        cfg = load_config(path)
        assert cfg["scale_grid"]["count"] == 12
        assert cfg["scale_grid"]["kappa"] == 3.0
        assert cfg["tolerances"] == {}

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"space": {"kind": "torus"}}, "unknown cloud kind"),
            ({"space": {"kind": "gasket", "level": 99}}, "must lie in"),
            ({"space": {"kind": "interval_grid"}}, "needs key"),
            ({"seed": "zero"}, "nonnegative integer"),
            ({"seed": True}, "nonnegative integer"),
            ({"d_w": 12.0}, "must lie in"),
            ({"suite": "everything"}, "unknown suite"),
            ({"scale_grid": {"count": 1}}, "must be an integer in"),
            ({"scale_grid": {"ratio": 1.5}}, "must lie in"),
            ({"tolerances": {"bogus": 1.0}}, "unknown tolerance"),
            ({"tolerances": {"calibration_rel": -1.0}}, "positive"),
            ({"typo_key": 1}, "unknown config keys"),
        ],
    )
    def test_rejects_bad_values(self, tmp_path, overrides, message):
        path = write_config(tmp_path, **overrides)
        with pytest.raises(ConfigError, match=message):
            load_config(path)

    def test_rejects_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.json")

    def test_rejects_broken_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)


class TestRun:
    def test_doubling_suite_exit_zero(self, tmp_path, capsys):
        path = write_config(tmp_path, out=str(tmp_path / "bundle"))
        assert main(["run", "--config", str(path)]) == 0
        summary = json.loads((tmp_path / "bundle" / "summary.json").read_text())
        assert summary["all_passed"] is True
        assert summary["n_checks"] == len(summary["checks"])
        assert summary["suites"] == ["doubling"]
        doubling = next(c for c in summary["checks"] if c["name"] == "doubling")
        assert doubling["constant"] <= 2.1
        assert (tmp_path / "bundle" / "doubling.csv").is_file()

    def test_summary_is_byte_identical(self, tmp_path):
        path = write_config(tmp_path)
        main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(path), "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "summary.json").read_bytes()
        b = (tmp_path / "b" / "summary.json").read_bytes()
        assert a == b

    def test_tolerance_override_fails_run(self, tmp_path):
        path = write_config(
            tmp_path,
            out=str(tmp_path / "bundle"),
            tolerances={"doubling_c_d_interval": 1.0},
        )
        assert main(["run", "--config", str(path)]) == 1
        summary = json.loads((tmp_path / "bundle" / "summary.json").read_text())
        assert summary["all_passed"] is False
        assert "doubling" in summary["failed"]

    def test_malformed_config_writes_nothing(self, tmp_path, capsys):
        path = write_config(tmp_path, seed=-1, out=str(tmp_path / "bundle"))
        assert main(["run", "--config", str(path)]) == 2
        assert not (tmp_path / "bundle").exists()
        assert "error:" in capsys.readouterr().err

    def test_missing_out_rejected(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["run", "--config", str(path)]) == 2

    def test_missing_seed_can_come_from_flag(self, tmp_path):
        cfg = {"space": {"kind": "interval_grid", "n": 401}, "suite": "doubling"}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        out = str(tmp_path / "bundle")
        assert main(["run", "--config", str(path), "--out", out]) == 2
        assert main(["run", "--config", str(path), "--out", out, "--seed", "4"]) == 0

    def test_inapplicable_suite_is_config_error(self, tmp_path):
        cloud_file = tmp_path / "tiny.cloud"
        cloud_file.write_text("3 euclidean\n0.0 0.3333333\n0.5 0.3333333\n1.0 0.3333334\n")
        cfg = {
            "space": {"kind": "file", "path": str(cloud_file)},
            "seed": 0,
            "suite": "graphform",
            "out": str(tmp_path / "bundle"),
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(path)]) == 2
        assert not (tmp_path / "bundle").exists()

    def test_fit_provenance_recorded(self, tmp_path):
        cfg = {
            "space": {"kind": "gasket", "level": 4},
            "d_w": "fit",
            "seed": 0,
            "suite": "doubling",
            "out": str(tmp_path / "bundle"),
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(path)]) == 0
        summary = json.loads((tmp_path / "bundle" / "summary.json").read_text())
        prov = summary["d_w_provenance"]
        assert prov["source"] == "fit"
        assert prov["fit_d_w"] is not None
        assert prov["eigen_d_w"] is not None
        assert isinstance(prov["agreement"], bool)
        assert summary["d_w"] == prov["value"]


class TestCheck:
    def test_single_suite_runs(self, tmp_path):
        path = write_config(tmp_path, suite="all", out=str(tmp_path / "bundle"))
        rc = main(["check", "--config", str(path), "--suite", "energy"])
        assert rc == 0
        summary = json.loads((tmp_path / "bundle" / "summary.json").read_text())
        assert summary["suites"] == ["energy"]

    def test_all_is_rejected(self, tmp_path):
        path = write_config(tmp_path, suite="all", out=str(tmp_path / "bundle"))
        assert main(["check", "--config", str(path)]) == 2


class TestSpaceAndSweep:
    def test_space_bundle(self, tmp_path):
        path = write_config(tmp_path, out=str(tmp_path / "s"))
        assert main(["space", "--config", str(path)]) == 0
        for name in ("cloud.csv", "doubling.csv", "space.json"):
            assert (tmp_path / "s" / name).is_file()
        payload = json.loads((tmp_path / "s" / "space.json").read_text())
        assert payload["cloud"]["n"] == 401
        assert payload["doubling"]["c_d"] <= 2.1

    def test_sweep_bundle(self, tmp_path):
        path = write_config(tmp_path, out=str(tmp_path / "s"))
        assert main(["sweep", "--config", str(path)]) == 0
        payload = json.loads((tmp_path / "s" / "sweep.json").read_text())
        assert set(payload["sweeps"]) == {"x", "x_squared", "sin_pi_x"}
        for label in payload["sweeps"]:
            assert (tmp_path / "s" / f"sweep_{label}.csv").is_file()


class TestReport:
    def test_prints_one_row_per_check(self, tmp_path, capsys):
        path = write_config(tmp_path, out=str(tmp_path / "bundle"))
        main(["run", "--config", str(path)])
        capsys.readouterr()
        assert main(["report", str(tmp_path / "bundle")]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        summary = json.loads((tmp_path / "bundle" / "summary.json").read_text())
        assert len(out) == summary["n_checks"] + 1
        assert all(line.startswith(("PASS", "FAIL")) for line in out[:-1])
        assert "all passed" in out[-1]

    def test_missing_bundle_exits_two(self, tmp_path, capsys):
        assert main(["report", str(tmp_path / "nothing")]) == 2
        assert "no summary.json" in capsys.readouterr().err

    def test_usage_error_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["run"])
        assert exc.value.code == 2
