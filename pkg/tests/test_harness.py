"""Experiment harness: configs, sweeps, persistence, and real-data flow."""

import dataclasses

import numpy as np
import pandas as pd
import pytest

from fairalloc import DemandMatrix, PolicyConfig
from fairalloc.demand import ConfigurationError
from fairalloc.harness import (
    ExperimentConfig,
    IngestError,
    ResultTable,
    episode_seed,
    erase_arrivals,
    ingest_sales,
    lambda_search,
    real_data_experiment,
    run_experiment,
    validate_bounds,
)


def _config(**overrides):
    base = dict(
        setting="symmetric",
        num_agents=6,
        horizon=5,
        expected_arrivals=2.0,
        budget_fraction=0.5,
        policies=(PolicyConfig("saffe"), PolicyConfig("greedy")),
        episodes=4,
        master_seed=11,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestExperimentConfig:
    def test_requires_policies_and_valid_counts(self):
        with pytest.raises(ConfigurationError):
            _config(policies=())
        with pytest.raises(ConfigurationError):
            _config(episodes=0)
        with pytest.raises(ConfigurationError):
            _config(budget_fraction=0.0)
        with pytest.raises(ConfigurationError):
            _config(format="parquet")

    def test_from_dict_rejects_unknown_fields(self):
        with pytest.raises(ConfigurationError, match="mystery"):
            ExperimentConfig.from_dict(
                {"policies": [{"kind": "saffe"}], "mystery": 1}
            )

    def test_from_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(
            "setting: symmetric\n"
            "num_agents: 4\n"
            "horizon: 3\n"
            "expected_arrivals: 1.5\n"
            "episodes: 2\n"
            "policies:\n"
            "  - kind: saffe\n"
            "  - kind: saffe_d\n"
            "    lambda: 0.5\n"
            "    lambda_schedule: sqrt_decay\n"
        )
        cfg = ExperimentConfig.from_yaml(str(path))
        assert cfg.num_agents == 4
        assert cfg.policies[1].lambda_value == 0.5

    def test_budget_fraction_semantics(self):
        cfg = _config(budget_fraction=0.25)
        from fairalloc.demand import expected_total_demand

        inst = cfg.instance()
        assert inst.budget == pytest.approx(
            0.25 * expected_total_demand(cfg.base_model())
        )


class TestEpisodeSeeds:
    def test_stable_derivation(self):
        assert episode_seed(3, 7) == episode_seed(3, 7)
        assert episode_seed(3, 7) != episode_seed(3, 8)
        assert episode_seed(4, 7) != episode_seed(3, 7)


class TestRunExperiment:
    def test_row_counts(self):
        table = run_experiment(_config())
        assert len(table.raw_rows) == 4 * 2  # episodes x policies
        assert len(table.aggregate_rows) == 2
        assert all(agg["episodes"] == 4 for agg in table.aggregate_rows)

    def test_oracle_tracks_hindsight_exactly(self):
        table = run_experiment(
            _config(policies=(PolicyConfig("saffe_oracle"),), episodes=1)
        )
        row = table.raw_rows[0]
        assert row["delta_a_max"] <= 1e-6
        assert row["delta_log_nsw"] <= 1e-6

    def test_rerun_is_byte_identical(self):
        a = run_experiment(_config())
        b = run_experiment(_config())
        assert a.raw_csv() == b.raw_csv()
        assert a.aggregate_csv() == b.aggregate_csv()

    def test_thread_count_does_not_change_results(self):
        serial = run_experiment(_config())
        parallel = run_experiment(_config(threads=2))
        assert serial.raw_csv() == parallel.raw_csv()

    def test_hindsight_dominates_every_row(self):
        cfg = _config(
            policies=(
                PolicyConfig("saffe"),
                PolicyConfig("saffe_d", lambda_value=1.0, lambda_schedule="sqrt_decay"),
                PolicyConfig("greedy"),
                PolicyConfig("guarded_hope", guardrail_lt=0.3),
            ),
            episodes=6,
        )
        table = run_experiment(cfg)
        for row in table.raw_rows:
            assert row["log_nsw"] <= row["hindsight_log_nsw"] + 1e-9

    def test_aggregates_recomputable_from_raw(self):
        table = run_experiment(_config())
        stored = [dict(r) for r in table.aggregate_rows]
        table.recompute_aggregates()
        for a, b in zip(stored, table.aggregate_rows):
            for key, val in a.items():
                if isinstance(val, float):
                    assert val == pytest.approx(b[key], abs=1e-9)
                else:
                    assert val == b[key]

    def test_noise_sweep_adds_rows_per_delta(self):
        table = run_experiment(_config(noise_deltas=(-0.5, 0.0, 0.5)))
        deltas = {row["noise_delta"] for row in table.raw_rows}
        assert deltas == {-0.5, 0.0, 0.5}
        assert len(table.raw_rows) == 3 * 4 * 2


class TestPersistence:
    def test_csv_files(self, tmp_path):
        table = run_experiment(_config())
        out = tmp_path / "results.csv"
        table.write(str(out), "csv")
        agg = tmp_path / "results_aggregate.csv"
        assert out.exists() and agg.exists()
        raw = pd.read_csv(out)
        assert len(raw) == len(table.raw_rows)
        assert list(raw.columns)[:5] == [
            "experiment",
            "noise_delta",
            "policy",
            "episode",
            "seed",
        ]

    def test_structured_output(self, tmp_path):
        import json

        table = run_experiment(_config(episodes=2))
        out = tmp_path / "results.json"
        table.write(str(out), "structured")
        payload = json.loads(out.read_text())
        assert set(payload) == {"raw", "aggregate"}
        assert len(payload["raw"]) == len(table.raw_rows)

    def test_write_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(_config()).write(str(a), "csv")
        run_experiment(_config()).write(str(b), "csv")
        assert a.read_bytes() == b.read_bytes()


class TestLambdaSearch:
    def test_returns_grid_member_with_stats(self):
        cfg = _config(episodes=3)
        result = lambda_search(cfg, [0.0, 0.5, 1.0], schedule="sqrt_decay")
        assert result.best_lambda in (0.0, 0.5, 1.0)
        assert len(result.stats) == 3

    def test_zero_grid_point_reproduces_plain_policy(self):
        cfg = _config(episodes=3)
        result = lambda_search(cfg, [0.0])
        plain = run_experiment(
            dataclasses.replace(cfg, policies=(PolicyConfig("saffe"),))
        )
        assert result.stats[0]["log_nsw_mean"] == pytest.approx(
            plain.aggregate_rows[0]["log_nsw_mean"], abs=1e-9
        )

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            lambda_search(_config(), [])


class TestValidateBounds:
    def test_balanced_bound_report(self):
        cfg = _config(
            setting="symmetric_equal", num_agents=4, horizon=6, episodes=10
        )
        report = validate_bounds(cfg, xi=0.25)
        assert report.regime == "balanced"
        assert report.bound > 0
        assert 0.0 <= report.within_fraction <= 1.0
        assert report.passed  # Chebyshev-style bound is very loose

    def test_xi_validation(self):
        with pytest.raises(ConfigurationError):
            validate_bounds(_config(), xi=1.5)


class TestEraseArrivals:
    def test_keep_all_is_identity(self, rng):
        values = rng.uniform(0, 5, (6, 4))
        dm = DemandMatrix(values)
        kept = erase_arrivals(dm, 1.0, seed=3)
        assert np.array_equal(kept.values, dm.values)

    def test_keep_none_repairs_one_arrival_per_agent(self, rng):
        values = rng.uniform(1, 5, (6, 4))
        kept = erase_arrivals(DemandMatrix(values), 0.0, seed=3)
        per_agent = (kept.values > 0).sum(axis=0)
        assert np.all(per_agent == 1)
        # the surviving entry keeps its original value
        t = np.argmax(kept.values[:, 0] > 0)
        assert kept.values[t, 0] == values[t, 0]

    def test_keep_half_binomial_count(self):
        rng = np.random.default_rng(0)
        values = rng.uniform(1, 2, (100, 10))  # 1000 arrivals
        kept = erase_arrivals(DemandMatrix(values), 0.5, seed=12)
        count = int((kept.values > 0).sum())
        sigma = np.sqrt(1000 * 0.25)
        assert abs(count - 500) <= 3 * sigma + 10  # +10 covers agent repairs

    def test_deterministic_given_seed(self, rng):
        values = rng.uniform(0, 5, (6, 4))
        dm = DemandMatrix(values)
        a = erase_arrivals(dm, 0.4, seed=5)
        b = erase_arrivals(dm, 0.4, seed=5)
        assert np.array_equal(a.values, b.values)


def _sales_fixture(tmp_path, days=35, agents=("s1", "s2"), start="2023-01-02"):
    rng = np.random.default_rng(77)
    rows = []
    dates = pd.date_range(start, periods=days, freq="D")
    for agent_idx, agent in enumerate(agents):
        weekly = 20.0 + 5.0 * agent_idx + 2.0 * np.arange(7)
        for d_idx, date in enumerate(dates):
            base = weekly[d_idx % 7]
            # two items per store-day to exercise aggregation
            for _ in range(2):
                rows.append(
                    {
                        "date": date.strftime("%Y-%m-%d"),
                        "store": agent,
                        "sales": float(base / 2 + rng.uniform(-1, 1)),
                    }
                )
    rng.shuffle(rows)  # out-of-order input
    path = tmp_path / "sales.csv"
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


class TestIngest:
    def test_aggregates_and_sorts(self, tmp_path):
        path = _sales_fixture(tmp_path, days=3)
        hist = ingest_sales(
            str(path), agent_column="store", value_column="sales"
        )
        assert list(hist.columns) == ["agent", "date", "value"] or set(
            hist.columns
        ) == {"agent", "date", "value"}
        assert len(hist) == 3 * 2  # one row per agent-day
        assert hist["date"].is_monotonic_increasing

    def test_missing_column(self, tmp_path):
        path = _sales_fixture(tmp_path, days=3)
        with pytest.raises(IngestError, match="missing column"):
            ingest_sales(str(path), agent_column="warehouse", value_column="sales")

    def test_unparsable_value_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,agent,value\n2023-01-01,a,3\n2023-01-02,a,oops\n")
        with pytest.raises(IngestError, match="line 3"):
            ingest_sales(str(path))

    def test_unparsable_date_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,agent,value\nnot-a-date,a,3\n")
        with pytest.raises(IngestError, match="line 2"):
            ingest_sales(str(path))


class TestRealDataFlow:
    def test_end_to_end_fixture(self, tmp_path):
        path = _sales_fixture(tmp_path, days=35)
        hist = ingest_sales(str(path), agent_column="store", value_column="sales")
        table = real_data_experiment(
            hist,
            split_date="2023-01-23",  # 21 fit days -> 3 observations per phase
            period=7,
            budget_fraction=0.5,
            policies=(PolicyConfig("saffe"), PolicyConfig("saffe_oracle")),
        )
        # 14 evaluation days -> 2 episodes x 2 policies
        assert len(table.raw_rows) == 4
        for row in table.raw_rows:
            assert row["log_nsw"] <= row["hindsight_log_nsw"] + 1e-9
        oracle_rows = [r for r in table.raw_rows if r["policy"] == "saffe_oracle"]
        assert all(r["delta_a_max"] <= 1e-6 for r in oracle_rows)

    def test_erasure_keeps_model_consistent(self, tmp_path):
        path = _sales_fixture(tmp_path, days=35)
        hist = ingest_sales(str(path), agent_column="store", value_column="sales")
        table = real_data_experiment(
            hist,
            split_date="2023-01-23",
            period=7,
            policies=(PolicyConfig("saffe"),),
            keep_prob=0.5,
            seed=4,
        )
        assert len(table.raw_rows) >= 1

    def test_bad_split_date(self, tmp_path):
        path = _sales_fixture(tmp_path, days=35)
        hist = ingest_sales(str(path), agent_column="store", value_column="sales")
        with pytest.raises(IngestError):
            real_data_experiment(hist, split_date="2030-01-01", period=7)
