import math

import pytest

from d2dgames.config import ExperimentConfig, loads_config
from d2dgames.harness import (
    CSV_HEADERS,
    rows_to_csv,
    run_experiment,
    summarize,
)


def _small_sumrate_config(**kw):
    text = """
    experiment = sumrate-vs-pairs
    sweep = 2,3
    drops = 3
    master_seed = 5
    m_cue = 3
    """
    config = loads_config(text)
    from dataclasses import replace

    return replace(config, **kw) if kw else config


class TestSummarize:
    def test_single_row_flagged(self):
        groups, _ = summarize([(2, "rica", 111, 5.0, 0, 0)])
        st = groups[(2, "rica")]
        assert st.mean == 5.0
        assert st.stddev == 0.0
        assert st.single_sample

    def test_two_rows_mean_and_sample_stddev(self):
        rows = [(2, "rica", 1, 2.0, 0, 0), (2, "rica", 2, 4.0, 0, 0)]
        groups, _ = summarize(rows)
        st = groups[(2, "rica")]
        assert st.mean == pytest.approx(3.0)
        assert st.stddev == pytest.approx(math.sqrt(2.0))
        assert st.count == 2

    def test_permutation_invariance(self):
        rows = [
            (2, "rica", 1, 2.0, 0, 0),
            (2, "random", 1, 1.0, 0, 0),
            (2, "rica", 2, 4.0, 0, 0),
            (2, "random", 2, 5.0, 0, 0),
        ]
        a = summarize(rows)
        b = summarize(list(reversed(rows)))
        assert a == b

    def test_paired_stats(self):
        rows = [
            (2, "a", 1, 2.0, 0, 0),
            (2, "b", 1, 1.0, 0, 0),
            (2, "a", 2, 1.0, 0, 0),
            (2, "b", 2, 3.0, 0, 0),
            (2, "a", 3, 2.0, 0, 0),
            (2, "b", 3, 2.0, 0, 0),
        ]
        _, paired = summarize(rows)
        st = paired[(2, "a", "b")]
        assert st.count == 3
        assert st.wins_a == 1
        assert st.wins_b == 1
        assert st.ties == 1
        assert st.mean_diff == pytest.approx((1.0 - 2.0 + 0.0) / 3)

    def test_nan_rows_excluded(self):
        rows = [(2, "a", 1, float("nan"), 0, 0), (2, "a", 2, 4.0, 0, 0)]
        groups, _ = summarize(rows)
        assert groups[(2, "a")].count == 1


class TestSumrateExperiment:
    def test_row_count_and_schema(self):
        config = _small_sumrate_config()
        summary = run_experiment(config)
        assert summary.header == CSV_HEADERS["sumrate-vs-pairs"]
        # drops x sweep points x schemes
        assert len(summary.rows) == 3 * 2 * 3
        assert not summary.errors

    def test_single_drop_single_scheme_row_count(self):
        config = _small_sumrate_config(drops=1, schemes=("random",))
        summary = run_experiment(config)
        assert len(summary.rows) == 2  # one row per sweep point

    def test_paired_design_same_seed_per_cell(self):
        summary = run_experiment(_small_sumrate_config())
        by_cell = {}
        for n_pairs, scheme, seed, *_ in summary.rows:
            by_cell.setdefault((n_pairs, scheme), []).append(seed)
        seeds = {k: tuple(v) for k, v in by_cell.items()}
        assert seeds[(2, "rica")] == seeds[(2, "random")] == seeds[(2, "all_cellular")]

    def test_deterministic_rows(self):
        a = run_experiment(_small_sumrate_config())
        b = run_experiment(_small_sumrate_config())
        assert a.rows == b.rows

    def test_parallel_matches_sequential(self):
        seq = run_experiment(_small_sumrate_config(workers=1))
        par = run_experiment(_small_sumrate_config(workers=4))
        assert seq.rows == par.rows
        assert rows_to_csv(seq.header, seq.rows) == rows_to_csv(par.header, par.rows)

    def test_csv_written_byte_identical(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        run_experiment(_small_sumrate_config(output_path=str(out_a)))
        run_experiment(_small_sumrate_config(output_path=str(out_b), workers=3))
        csv_a = (out_a / "sumrate.csv").read_bytes()
        csv_b = (out_b / "sumrate.csv").read_bytes()
        assert csv_a == csv_b
        assert csv_a.startswith(b"n_pairs,scheme,drop_seed,sum_rate_bps_hz,rounds,valuation_calls\n")
        config_echo = (out_a / "effective_config.txt").read_text()
        assert loads_config(config_echo) is not None


class TestContentExperiment:
    def test_rows_and_determinism(self):
        text = """
        experiment = content-distribution
        drops = 2
        master_seed = 3
        [content]
        n_d2d = 6
        k_seeds = 2
        m_cue = 2
        file_packets = 80
        rounds = 4
        """
        config = loads_config(text)
        a = run_experiment(config)
        b = run_experiment(config)
        assert a.rows == b.rows
        # per drop and scheme: rounds+1 rows
        assert len(a.rows) == 2 * 2 * 5
        for row in a.rows:
            assert len(row) == len(CSV_HEADERS["content-distribution"])


class TestPowerAndStackelbergExperiments:
    def test_power_rows(self):
        config = loads_config("experiment = power-control\n[power]\nplayers = 3\n")
        summary = run_experiment(config)
        iters = {row[0] for row in summary.rows}
        players = {row[1] for row in summary.rows}
        assert players == {0, 1, 2}
        assert 0 in iters
        # powers stay within bounds
        assert all(0.0 <= row[2] <= config.radio.p_d2d_w + 1e-12 for row in summary.rows)

    def test_stackelberg_rows(self):
        config = loads_config(
            "experiment = stackelberg\n[stackelberg]\nlambda_points = 50\n"
        )
        summary = run_experiment(config)
        assert len(summary.rows) == 50
        lams = [row[0] for row in summary.rows]
        assert lams == sorted(lams)
        # follower power non-increasing in price
        ps = [row[1] for row in summary.rows]
        assert all(b <= a + 1e-12 for a, b in zip(ps, ps[1:]))


class TestOracleCheck:
    def test_all_checks_pass(self):
        config = loads_config("experiment = oracle-check\n")
        summary = run_experiment(config)
        assert summary.checks is not None
        assert summary.checks["all_passed"], summary.checks


class TestCli:
    def test_print_defaults(self, capsys):
        from d2dgames.cli import main

        assert main(["print-defaults"]) == 0
        out = capsys.readouterr().out
        assert "[radio]" in out
        assert loads_config(out) == ExperimentConfig()

    def test_run_with_config(self, tmp_path, capsys):
        from d2dgames.cli import main

        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "experiment = sumrate-vs-pairs\nsweep = 2\ndrops = 1\nm_cue = 2\n"
        )
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out_dir)]) == 0
        assert (out_dir / "sumrate.csv").exists()
        assert (out_dir / "effective_config.txt").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        from d2dgames.cli import main

        cfg = tmp_path / "bad.cfg"
        cfg.write_text("experiment = nonsense\n")
        assert main(["run", "--config", str(cfg)]) == 2
        assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
