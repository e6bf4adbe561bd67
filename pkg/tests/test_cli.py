import json

import numpy as np
import pytest

from fpplab.cli import (
    ConfigError,
    build_summary,
    config_digest,
    main,
    parse_config,
    records_from_csv,
    records_to_csv,
    serialize_config,
)
from fpplab.estimators import SweepConfig, run_sweep
from fpplab.weights import Bernoulli, Uniform

MINIMAL = """
# minimal sweep
model = fpp-point
d = 2
n_list = 4,6
dist = uniform:0,1
replicas = 3
seed = 1
"""


class TestConfigGrammar:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.kappa == 0.5
        assert cfg.bootstrap == 2000
        assert cfg.dyadic_depth == 53
        assert cfg.n_list == (4, 6)

    def test_distribution_grammar(self):
        cfg = parse_config(MINIMAL.replace("uniform:0,1", "bernoulli:1,2,0.5"))
        assert cfg.spec == Bernoulli(1, 2, 0.5)

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="replcias"):
            parse_config(MINIMAL + "replcias = 7\n")

    def test_parse_error_line_number(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config(MINIMAL + "not a key value pair\n")

    def test_round_trip(self):
        for text in (
            MINIMAL,
            MINIMAL.replace("uniform:0,1", "geometric:0.5").replace(
                "fpp-point", "lpp"
            ),
        ):
            cfg = parse_config(text)
            assert parse_config(serialize_config(cfg)) == cfg

    def test_semantic_validation(self):
        bad = MINIMAL.replace("uniform:0,1", "bernoulli:0,1,0.7")
        with pytest.raises((ConfigError, ValueError)):
            parse_config(bad)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(MINIMAL + "seed = 2\n")


class TestRecordsCsv:
    @pytest.mark.parametrize(
        "model,spec",
        [
            ("fpp-point", Uniform(0, 1)),
            ("fpp-torus", Bernoulli(1, 2, 0.5)),
            ("lpp", None),
        ],
    )
    def test_round_trip(self, model, spec):
        from fpplab.lpp import default_spec

        cfg = SweepConfig(
            model=model,
            d=2,
            n_list=(4,),
            spec=spec or default_spec(),
            replicas=3,
            seed=5,
            record_fn=(model == "fpp-point"),
        )
        records = run_sweep(cfg, threads=1)
        text = records_to_csv(model, records)
        back = records_from_csv(model, text, n_edges=2 * 16)
        assert len(back) == len(records)
        for a, b in zip(records, back):
            assert (a.n, a.replica, a.T) == (b.n, b.replica, b.T)
            assert a.F_n == b.F_n
            assert a.g_int_size == b.g_int_size
            assert a.win_counts == b.win_counts
            if a.g_bitmap is not None:
                assert np.array_equal(a.g_bitmap, b.g_bitmap)

    def test_header_stability(self):
        text = records_to_csv("lpp", [])
        assert text.splitlines()[0] == "n,replica,T"


class TestCliCommands:
    def test_fpp_run_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        args = [
            "fpp", "run", "--d", "2", "--dist", "uniform:0,1", "--n", "4,6",
            "--replicas", "3", "--seed", "1", "--threads", "1",
        ]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        for name in ("records_fpp-point_n4.csv", "records_fpp-point_n6.csv", "summary.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_unknown_flag_exit_1(self, tmp_path, capsys):
        code = main(["fpp", "run", "--bogus", "1", "--out", str(tmp_path)])
        assert code == 1

    def test_missing_flags_exit_1(self, tmp_path):
        code = main(["fpp", "run", "--out", str(tmp_path)])
        assert code == 1

    def test_config_file_run(self, tmp_path):
        cfg_path = tmp_path / "sweep.cfg"
        cfg_path.write_text(MINIMAL + "threads = 1\n")
        code = main(["fpp", "run", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 0
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert summary["model"] == "fpp-point"
        assert set(summary["per_n"]) == {"4", "6"}

    def test_report_regenerates_identically(self, tmp_path):
        out = tmp_path / "sweep"
        args = [
            "fpp", "fn", "--d", "2", "--dist", "uniform:0,1", "--n", "4,6",
            "--replicas", "3", "--seed", "2", "--threads", "1", "--out", str(out),
        ]
        assert main(args) == 0
        original = (out / "summary.json").read_bytes()
        (out / "summary.json").unlink()
        assert main(["report", "--store", str(out)]) == 0
        assert (out / "summary.json").read_bytes() == original

    def test_fit_chi_synthetic_power_law(self, tmp_path, capsys):
        payload = {"pairs": [[n, float(n) ** (2.0 / 3.0)] for n in (8, 16, 32, 64)]}
        path = tmp_path / "pairs.json"
        path.write_text(json.dumps(payload))
        assert main(["fit", "chi", "--input", str(path)]) == 0
        out = capsys.readouterr().out
        assert "chi_hat = 0.333333" in out

    def test_fit_chi_from_summary(self, tmp_path, capsys):
        cfg = parse_config(MINIMAL.replace("4,6", "4,6,8"))
        records = run_sweep(cfg, threads=1)
        summary = build_summary(cfg, records)
        path = tmp_path / "summary.json"
        path.write_text(json.dumps(summary))
        assert main(["fit", "chi", "--input", str(path)]) == 0
        assert "chi_hat" in capsys.readouterr().out

    def test_ineq_verify_small(self, tmp_path):
        out = tmp_path / "ineq.json"
        code = main(
            ["ineq", "verify", "--suite", "all", "--seed", "7",
             "--instances", "50", "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        names = {entry["check"] for entry in payload}
        assert "efron_stein" in names
        assert "fpp_exhaustive_4_edges" in names
        assert "fpp_exhaustive_7_edges" in names
        assert all(entry["holds"] for entry in payload)

    def test_torus_influence_command(self, tmp_path):
        out = tmp_path / "torus"
        code = main(
            ["torus", "influence", "--d", "2", "--dist", "bernoulli:1,2,0.5",
             "--n", "4", "--replicas", "4", "--seed", "3", "--threads", "1",
             "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert "influence" in summary

    def test_lpp_run_command(self, tmp_path):
        out = tmp_path / "lpp"
        code = main(
            ["lpp", "run", "--d", "2", "--dist", "geometric:0.5", "--n", "4,8",
             "--replicas", "3", "--seed", "9", "--threads", "1", "--out", str(out)]
        )
        assert code == 0
        assert (out / "records_lpp_n8.csv").exists()

    def test_manifest_contents(self, tmp_path):
        out = tmp_path / "m"
        main(
            ["fpp", "run", "--d", "2", "--dist", "uniform:0,1", "--n", "4",
             "--replicas", "2", "--seed", "1", "--threads", "1", "--out", str(out)]
        )
        manifest = json.loads((out / "manifest.json").read_text())
        cfg = parse_config(manifest["config_text"])
        assert manifest["config_digest"] == config_digest(cfg)
        assert manifest["record_counts"] == {"4": 2}
        assert "started_at" in manifest and "finished_at" in manifest
        # timestamps never leak into the data files
        csv_text = (out / "records_fpp-point_n4.csv").read_text()
        assert "20" not in csv_text.splitlines()[0]

    def test_plot_manifest(self, tmp_path):
        out = tmp_path / "p"
        main(
            ["fpp", "run", "--d", "2", "--dist", "uniform:0,1", "--n", "4,6",
             "--replicas", "2", "--seed", "1", "--threads", "1", "--out", str(out)]
        )
        text = (out / "plots.manifest").read_text()
        assert "c*n**(2/3)" in text
        assert "c*n/log(n)" in text
