import csv
import io
import math
from pathlib import Path

import numpy as np
import pytest

from swipt_noma import harness
from swipt_noma.channel import GeometryConfig, path_loss, sample_draw, trial_rng
from swipt_noma.cli import main
from swipt_noma.system import SystemParams

DATA = Path(__file__).parent / "data"


def small_config(**kw):
    base = dict(strategies=["coop_sca", "noncoop_miso", "oma_dynamic"], grid=[-30.0], trials=2, seed=3)
    base.update(kw)
    return harness.ExperimentConfig(**base)


class TestGolden:
    def test_matches_golden_file(self):
        cfg = harness.load_config(DATA / "golden_config.yaml")
        records, _ = harness.run_sweep(cfg)
        assert harness.records_to_csv(records) == (DATA / "golden_sweep.csv").read_text()

    def test_golden_row_by_hand(self):
        # oma_dynamic at -25 dBm, trial 0, recomputed from the raw draw
        p = SystemParams(transmit_power_dbm=-25.0, antenna_count_nt=2)
        geo = GeometryConfig()
        draw = sample_draw(trial_rng(7, 0), p, geo)
        bs = np.array(geo.bs_position)
        d1 = np.linalg.norm(draw.pos_user1 - bs)
        d2 = np.linalg.norm(draw.pos_user2 - bs)
        scale = 10 ** ((-25.0 + 90.0) / 10)
        g1 = scale * path_loss(d1, 4.0) * np.sum(np.abs(draw.raw_h1_vec) ** 2)
        g2 = scale * path_loss(d2, 2.0) * np.sum(np.abs(draw.raw_h2_vec) ** 2)
        r2 = (1 - 1 / math.log2(1 + g1)) * math.log2(1 + g2) * 1e6
        rows = list(csv.DictReader(io.StringIO((DATA / "golden_sweep.csv").read_text())))
        row = next(r for r in rows if r["strategy"] == "oma_dynamic" and r["sweep_value"] == "-25" and r["trial"] == "0")
        assert float(row["R2"]) == pytest.approx(r2, rel=1e-11)


class TestSweep:
    def test_schema(self):
        records, summary = harness.run_sweep(small_config())
        header = harness.records_to_csv(records).splitlines()[0]
        assert header.split(",") == list(harness.CSV_COLUMNS)
        assert len(records) == 3 * 2
        assert {row["strategy"] for row in summary} == {"coop_sca", "noncoop_miso", "oma_dynamic"}

    def test_deterministic_with_solver(self):
        a = harness.records_to_csv(harness.run_sweep(small_config())[0])
        b = harness.records_to_csv(harness.run_sweep(small_config())[0])
        assert a == b

    def test_same_draw_across_points(self):
        cfg = small_config(strategies=["oma_dynamic"], grid=[-30.0, -20.0])
        insts = harness._instances(cfg)
        ratio = insts[-20.0][0].h1_vec / insts[-30.0][0].h1_vec
        np.testing.assert_allclose(ratio, math.sqrt(10.0))

    def test_feasibility_grows_with_power(self):
        cfg = small_config(strategies=["coop_gss", "oma_dynamic"], grid=[-45.0, -35.0, -25.0], trials=40)
        _, summary = harness.run_sweep(cfg)
        for s in ("coop_gss", "oma_dynamic"):
            probs = [r["feasible_prob"] for r in summary if r["strategy"] == s]
            assert probs == sorted(probs)

    def test_conditional_average(self):
        recs = [
            harness.SweepRecord("a", 1.0, 0, 0, 1.0, 2.0, 3.0, True),
            harness.SweepRecord("a", 1.0, 1, 0, 0.0, 0.0, 0.0, False),
        ]
        assert harness.summarize(recs)[0]["mean_Rsum"] == pytest.approx(1.5)
        assert harness.summarize(recs, "conditional")[0]["mean_Rsum"] == pytest.approx(3.0)
        assert harness.summarize(recs)[0]["feasible_prob"] == 0.5

    def test_label_suffix(self):
        records, _ = harness.run_sweep(small_config(strategies=["oma_fixed"], label="ps35"))
        assert {r.strategy for r in records} == {"oma_fixed@ps35"}


class TestTargets:
    def test_equal_sinr(self):
        tg = harness.targets_for(small_config(), -30.0)
        assert (tg.gamma_coop, tg.gamma_nc, tg.coop_prelog) == (1.0, 1.0, 1.0)

    def test_equal_rate(self):
        cfg = small_config(sweep="r_target", grid=[1.0], target_mapping="equal_rate")
        tg = harness.targets_for(cfg, 1.0)
        assert (tg.gamma_coop, tg.gamma_nc, tg.coop_prelog) == (3.0, 1.0, 0.5)

    def test_rate_sweep_equal_sinr(self):
        cfg = small_config(sweep="r_target", grid=[2.0])
        assert harness.targets_for(cfg, 2.0).gamma_coop == pytest.approx(3.0)


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"trials": 0},
            {"grid": []},
            {"strategies": ["magic"]},
            {"sweep": "bandwidth"},
            {"target_mapping": "other"},
            {"es_grid": 1},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            small_config(**kw)

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            harness.config_from_dict({"strategies": ["oma_fixed"], "colour": "red"})

    def test_overrides_win(self, tmp_path):
        cfg = harness.load_config(DATA / "golden_config.yaml", {"seed": 11, "trials": None})
        assert cfg.seed == 11 and cfg.trials == 2

    def test_presets(self):
        for fig in harness.FIGURES:
            if fig == "fig7":
                with pytest.raises(ValueError):
                    harness.preset(fig)
            else:
                assert all(isinstance(c, harness.ExperimentConfig) for c in harness.preset(fig, trials=1))

    def test_convergence_trace(self):
        recs = harness.convergence_trace(seed=0)
        assert {r.strategy for r in recs} == {"coop_sca", "coop_gss"}
        final = {s: max((r for r in recs if r.strategy == s), key=lambda r: r.sweep_value).R2 for s in ("coop_sca", "coop_gss")}
        assert final["coop_sca"] == pytest.approx(final["coop_gss"], rel=1e-3)


class TestCli:
    def test_solve_siso(self, capsys):
        assert main(["solve-siso", "--h1", "1", "--h2", "10", "--g", "2"]) == 0
        out = capsys.readouterr().out
        assert "objective" in out and "optimal" in out

    def test_solve_miso_matches_scalar(self, capsys):
        assert main(["solve-miso", "--h1", "1", "--h2", "3.16227766016838", "--g", "2"]) == 0
        line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("objective"))
        assert float(line.split()[1]) == pytest.approx(4.3452, rel=1e-3)

    def test_missing_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["solve-siso", "--h1", "1"])
        assert exc.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_strict_infeasible(self, capsys):
        args = ["solve-siso", "--h1", "2", "--h2", "0.5", "--g", "1"]
        assert main(args) == 0
        assert main(args + ["--strict"]) == 1

    def test_bad_config(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("strategies: [nope]\n")
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--config", str(bad)])
        assert exc.value.code == 2

    def test_sweep_writes_files(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        assert main(["sweep", "--config", str(DATA / "golden_config.yaml"), "--out", str(out)]) == 0
        assert out.read_text() == (DATA / "golden_sweep.csv").read_text()
        assert (tmp_path / "run_summary.csv").read_text().startswith("strategy,sweep_value,trials")

    def test_seed_override_changes_output(self, capsys):
        main(["sweep", "--config", str(DATA / "golden_config.yaml"), "--seed", "8"])
        assert capsys.readouterr().out != (DATA / "golden_sweep.csv").read_text()
