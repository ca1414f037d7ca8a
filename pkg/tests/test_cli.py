import json
import time

import numpy as np
import pytest

from iwakf.cli import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    _fmt,
    load_config,
    main,
)


def run_cli(*argv):
    return main(list(argv))


class TestFloatFormat:
    def test_round_trip_exact(self):
        for x in (0.1, 1 / 3, np.pi, 1e-300, -2.5e17):
            assert float(_fmt(x)) == x

    def test_integers_stay_integers(self):
        assert _fmt(7) == "7"
        assert _fmt(np.int64(-3)) == "-3"


class TestLoadConfig:
    def test_defaults_without_file(self):
        cfg = load_config(None, {})
        assert cfg.N == 20000
        assert cfg.filter_spec == "sf1"

    def test_overrides_win(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"N": 15000, "seed": 3}))
        cfg = load_config(p, {"seed": 9})
        assert cfg.N == 15000
        assert cfg.seed == 9

    def test_manifest_unwrapping(self, tmp_path):
        p = tmp_path / "manifest.json"
        p.write_text(json.dumps({"tool": "iwakf", "config": {"seed": 5}}))
        assert load_config(p, {}).seed == 5

    def test_gamma_list_becomes_tuple(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"filter_spec": [0.64, 0.27784, -3.0, 1.0]}))
        cfg = load_config(p, {})
        assert cfg.filter_spec == (0.64, 0.27784, -3.0, 1.0)

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"nonsense": 1}))
        with pytest.raises(ValueError):
            load_config(p, {})

    def test_short_run_clamps_schedule(self):
        cfg = load_config(None, {"N": 200})
        assert cfg.adaptation.window_length < 200
        assert cfg.burn_in <= 50

    def test_full_run_untouched(self):
        cfg = load_config(None, {"N": 20000})
        assert cfg.adaptation.window_length == 12000
        assert cfg.burn_in == 500


class TestSimulate:
    def test_smoke_run_is_fast(self, tmp_path, capsys):
        t0 = time.perf_counter()
        rc = run_cli(
            "simulate", "--trials", "1", "--steps", "200", "--out", str(tmp_path)
        )
        elapsed = time.perf_counter() - t0
        assert rc == 0
        assert elapsed < 1.0
        out = capsys.readouterr().out
        assert "iwakf" in out
        for name in (
            "metrics.csv",
            "autocorr_kf.csv",
            "autocorr_aug.csv",
            "autocorr_iwakf.csv",
            "psd_kf.csv",
            "adaptation_trace.csv",
            "manifest.json",
        ):
            assert (tmp_path / name).exists()

    def test_missing_config_exit_code(self, tmp_path, capsys):
        rc = run_cli(
            "simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)
        )
        assert rc == EXIT_CONFIG
        assert "nope.json" in capsys.readouterr().err

    def test_invalid_json_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = run_cli("simulate", "--config", str(bad), "--out", str(tmp_path))
        assert rc == EXIT_CONFIG

    def test_unstable_filter_config_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"filter_spec": [1.5, 0.0, 0.0, 1.0], "N": 300, "trials": 1}))
        rc = run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path))
        assert rc == EXIT_CONFIG

    def test_byte_reproducibility(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert (
                run_cli(
                    "simulate", "--trials", "1", "--steps", "400",
                    "--seed", "11", "--out", str(out),
                )
                == 0
            )
        for name in ("metrics.csv", "autocorr_iwakf.csv", "adaptation_trace.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        ma = json.loads((a / "manifest.json").read_text())
        mb = json.loads((b / "manifest.json").read_text())
        assert ma["artifacts"] == mb["artifacts"]

    def test_manifest_checksums_match_files(self, tmp_path):
        import hashlib

        assert (
            run_cli("simulate", "--trials", "1", "--steps", "300", "--out", str(tmp_path))
            == 0
        )
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        for name, digest in manifest["artifacts"].items():
            assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest

    def test_manifest_rerun(self, tmp_path):
        first = tmp_path / "first"
        assert (
            run_cli(
                "simulate", "--trials", "1", "--steps", "300",
                "--seed", "2", "--out", str(first),
            )
            == 0
        )
        second = tmp_path / "second"
        assert (
            run_cli(
                "simulate", "--config", str(first / "manifest.json"),
                "--out", str(second),
            )
            == 0
        )
        assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()

    def test_out_dir_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("IWAKF_OUT", str(tmp_path / "envout"))
        assert run_cli("simulate", "--trials", "1", "--steps", "200") == 0
        assert (tmp_path / "envout" / "manifest.json").exists()


class TestWhiteness:
    def write_series(self, tmp_path, values, header="innovation"):
        p = tmp_path / "z.csv"
        lines = [header] + [f"{v}" for v in values]
        p.write_text("\n".join(lines) + "\n")
        return p

    def test_white_series_passes(self, tmp_path, capsys):
        rngl = np.random.default_rng(0)
        p = self.write_series(tmp_path, rngl.normal(size=5000))
        assert run_cli("whiteness", str(p)) == 0
        out = capsys.readouterr().out
        passed = int(out.strip().splitlines()[-1].split("/")[0])
        assert passed >= 8

    def test_alternating_series_fails_lag1(self, tmp_path, capsys):
        p = self.write_series(tmp_path, [1.0, -1.0] * 200)
        assert run_cli("whiteness", str(p)) == 0
        out = capsys.readouterr().out
        lag1 = [l for l in out.splitlines() if l.startswith("lag  1")][0]
        assert "FAIL" in lag1

    def test_empty_file(self, tmp_path, capsys):
        p = tmp_path / "empty.csv"
        p.write_text("")
        assert run_cli("whiteness", str(p)) == EXIT_CONFIG

    def test_header_only(self, tmp_path):
        p = self.write_series(tmp_path, [])
        assert run_cli("whiteness", str(p)) == EXIT_CONFIG

    def test_too_short_series(self, tmp_path):
        p = self.write_series(tmp_path, [0.1, 0.2, 0.3])
        assert run_cli("whiteness", str(p)) == EXIT_CONFIG

    def test_named_column(self, tmp_path, capsys):
        p = tmp_path / "multi.csv"
        rngl = np.random.default_rng(1)
        rows = ["step,z"] + [f"{k},{v}" for k, v in enumerate(rngl.normal(size=2000))]
        p.write_text("\n".join(rows) + "\n")
        assert run_cli("whiteness", str(p), "--column", "z") == 0


class TestPsdCheck:
    def test_default_white_check_passes(self, capsys):
        assert run_cli("psd-check") == 0
        out = capsys.readouterr().out
        assert "pass" in out
        assert "expected-colored" in out

    def test_unstable_gamma_is_numerical_failure(self, capsys):
        rc = run_cli("psd-check", "--gamma", "1.5", "0", "0", "1")
        assert rc == EXIT_NUMERICAL
        assert "UnstableFilter" in capsys.readouterr().err

    def test_writes_curves(self, tmp_path):
        assert run_cli("psd-check", "--out", str(tmp_path)) == 0
        assert (tmp_path / "psd_white.csv").exists()
        assert (tmp_path / "psd_colored.csv").exists()
