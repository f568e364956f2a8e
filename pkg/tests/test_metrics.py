import numpy as np
import pytest

from alertrl.env import EnvConfig
from alertrl.metrics import (
    EpisodeMetrics,
    best_static_by_month,
    build_comparison,
    cnfs,
    month_of_day,
    over_under_totals,
    policy_heatmap,
    read_episode_metrics_csv,
    relative_improvement,
    run_policy,
    write_episode_metrics_csv,
)
from alertrl.stream import default_calibration, generate_stream

from conftest import make_stream


def em(day, savings=0.0, losses=0.0, over=0, under=0, dropped=0, claims=0):
    return EpisodeMetrics(day, savings, losses, over, under, dropped, claims)


TEST_ENV = EnvConfig(money_scale=11000.0, money_scale_state=11000.0)


# --- cnfs ------------------------------------------------------------------

def test_cnfs_empty():
    assert cnfs([]) == 0.0


def test_cnfs_prefix_sum():
    metrics = [em(1, 10, 0), em(2, 0, 5), em(3, 7, 0)]
    assert cnfs(metrics, up_to_day=3) == pytest.approx(12.0)
    assert cnfs(metrics, up_to_day=2) == pytest.approx(5.0)
    assert cnfs(metrics, up_to_day=0) == 0.0


def test_cnfs_recurrence_matches_bruteforce():
    rng = np.random.default_rng(0)
    nets = rng.normal(size=20)
    metrics = [em(d + 1, savings=max(n, 0), losses=max(-n, 0))
               for d, n in enumerate(nets)]
    for n in range(1, 21):
        # Brute-force prefix recomputation as the oracle.
        assert cnfs(metrics, n) == pytest.approx(nets[:n].sum())
        assert cnfs(metrics, n) == pytest.approx(
            cnfs(metrics, n - 1) + metrics[n - 1].net
        )


def test_cnfs_monotone_iff_nonnegative_nets():
    gains = [em(d, savings=d) for d in range(1, 6)]
    values = [cnfs(gains, d) for d in range(1, 6)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    mixed = [em(1, 10, 0), em(2, 0, 99), em(3, 5, 0)]
    values = [cnfs(mixed, d) for d in range(1, 4)]
    assert not all(a <= b for a, b in zip(values, values[1:]))


# --- relative improvement --------------------------------------------------

def test_relative_improvement_identity():
    assert relative_improvement(5.0, 5.0) == 0.0


def test_relative_improvement_reference_values():
    # 112,058.71 vs a 81,733.93 baseline is a 37.10% improvement.
    assert relative_improvement(112_058.71, 81_733.93) == pytest.approx(
        37.10, abs=0.005
    )


def test_relative_improvement_zero_baseline():
    with pytest.raises(ZeroDivisionError):
        relative_improvement(1.0, 0.0)


# --- over/under totals -----------------------------------------------------

def test_over_under_all_zero():
    totals = over_under_totals([em(1), em(2)])
    assert totals == {"over": 0, "under": 0, "sum": 0}


def test_over_under_column_sums():
    metrics = [em(1, over=700, under=20), em(2, over=5, under=2)]
    assert over_under_totals(metrics) == {"over": 705, "under": 22, "sum": 727}


def test_over_under_matches_transaction_recount():
    # 3-day toy stream; recount over/under alerts directly from transactions.
    rows = []
    for day in (1, 2, 3):
        rows += [
            (day, 1, 10.0, False, 95),  # alerted non-fraud -> over
            (day, 1, 20.0, True, 95),  # alerted fraud
            (day, 2, 30.0, True, 5),  # unalerted fraud -> under
            (day, 3, 40.0, False, 95),  # alerted non-fraud -> over
        ]
    stream = make_stream(rows)
    env = EnvConfig(
        c_max=500, thresholds=(56, 66), money_scale=1.0, money_scale_state=1.0,
        p_resolve_within_hour=1.0, p_claim_report=0.0,
    )
    metrics = run_policy(0, stream, env, seed=0)
    expected_over = sum(1 for r in rows if not r[3] and r[4] > 56)
    expected_under = sum(1 for r in rows if r[3] and r[4] <= 56)
    assert over_under_totals(metrics) == {
        "over": expected_over,
        "under": expected_under,
        "sum": expected_over + expected_under,
    }


# --- run_policy ------------------------------------------------------------

def test_run_policy_no_fraud_stream():
    rows = [(d, h, 25.0, False, 50) for d in (1, 2) for h in (9, 13)]
    metrics = run_policy(3, make_stream(rows), TEST_ENV, seed=1)
    assert all(m.net == 0.0 for m in metrics)
    assert all(m.under_alerts == 0 for m in metrics)


def test_run_policy_overalert_monotonicity():
    stream = generate_stream(default_calibration(num_days=3, seed=8))
    low = run_policy(0, stream, TEST_ENV, seed=1)
    high = run_policy(10, stream, TEST_ENV, seed=1)
    assert (
        over_under_totals(low)["over"] >= over_under_totals(high)["over"]
    )


def test_run_policy_deterministic():
    stream = generate_stream(default_calibration(num_days=3, seed=8))
    a = run_policy(4, stream, TEST_ENV, seed=7)
    b = run_policy(4, stream, TEST_ENV, seed=7)
    assert a == b


def test_run_policy_conservation():
    stream = generate_stream(default_calibration(num_days=4, seed=15))
    for policy in (0, 5, 10):
        metrics = run_policy(policy, stream, TEST_ENV, seed=2)
        total = sum(m.fraud_savings + m.fraud_losses for m in metrics)
        assert total == pytest.approx(stream.amount[stream.is_fraud].sum())


def test_run_policy_step_log(tmp_path):
    stream = generate_stream(default_calibration(num_days=1, seed=8))
    log_rows = []
    run_policy(4, stream, TEST_ENV, seed=7, step_log=log_rows)
    assert len(log_rows) == 24
    day, hour, action = log_rows[0].split(",")[:3]
    assert (day, hour, action) == ("1", "1", "4")


# --- calendar --------------------------------------------------------------

def test_month_of_day():
    assert month_of_day(1) == 1
    assert month_of_day(31) == 1
    assert month_of_day(32) == 2
    assert month_of_day(60) == 3  # Mar 1
    assert month_of_day(273) == 9  # Sep 30
    assert month_of_day(274) == 10  # Oct 1
    assert month_of_day(365) == 12
    assert month_of_day(366) == 1  # wraps


# --- best static by month --------------------------------------------------

def test_best_static_single_threshold_action_set():
    rows = [(d, 10, 50.0, d % 7 == 0, 80) for d in range(1, 60)]  # Jan + Feb
    env = EnvConfig(
        thresholds=(56, 98), money_scale=1.0, money_scale_state=1.0,
        p_resolve_within_hour=1.0, p_claim_report=0.0,
    )
    winners = best_static_by_month(make_stream(rows), env, seed=0)
    assert [k for _, k in winners] == [0, 0]  # Thr0 wins every month


def test_best_static_regime_shift():
    # Month 1: fraud sits between the two cutoffs, so the lower threshold
    # wins.  Month 2: a flood of high-scoring non-fraud exhausts capacity
    # under the lower threshold, so the higher threshold wins.
    rows = []
    for d in range(1, 32):  # month 1
        rows.append((d, 12, 500.0, True, 60))
    for d in range(32, 60):  # month 2
        for i in range(30):
            rows.append((d, 10, 10.0, False, 60))
        rows.append((d, 12, 500.0, True, 90))
    env = EnvConfig(
        c_max=10, thresholds=(56, 66), money_scale=1.0, money_scale_state=1.0,
        p_resolve_within_hour=1.0, p_claim_report=0.0,
    )
    winners = best_static_by_month(make_stream(rows), env, seed=0)
    assert winners == [(1, 0), (2, 1)]


# --- heatmap ---------------------------------------------------------------

def test_heatmap_constant_policy_single_column():
    stream = generate_stream(default_calibration(num_days=3, seed=4))
    heat = policy_heatmap(6, stream, TEST_ENV, seed=0)
    assert heat.shape == (24, 11)
    assert np.allclose(heat[:, 6], 1.0)
    assert np.allclose(heat.sum(), 24.0)


def test_heatmap_rows_are_probability_vectors():
    stream = generate_stream(default_calibration(num_days=5, seed=4))
    rng = np.random.default_rng(0)

    def random_policy(vec):
        return int(rng.integers(0, 11))

    heat = policy_heatmap(random_policy, stream, TEST_ENV, seed=0)
    assert np.allclose(heat.sum(axis=1), 1.0, atol=1e-12)
    assert (heat >= 0).all()


# --- comparison report -----------------------------------------------------

@pytest.fixture(scope="module")
def comparison():
    stream = generate_stream(default_calibration(num_days=59, seed=44))
    return build_comparison(None, stream, TEST_ENV, seed=3)


def test_comparison_baseline_self_improvement_zero(comparison):
    baseline = comparison.baseline
    assert all(v == 0.0 for v in comparison.improvements[baseline].values())


def test_comparison_months_and_policies(comparison):
    assert comparison.months == [1, 2]
    assert len(comparison.policies) == 11


def test_comparison_tables_written(tmp_path, comparison):
    cnfs_path = tmp_path / "cnfs.csv"
    ou_path = tmp_path / "ou.csv"
    bs_path = tmp_path / "bs.csv"
    js_path = tmp_path / "report.json"
    comparison.write_cnfs_table(cnfs_path)
    comparison.write_over_under_table(ou_path)
    comparison.write_best_static_table(bs_path)
    comparison.to_json(js_path)
    header = cnfs_path.read_text().splitlines()[0]
    assert header.startswith("policy,cnfs_month_1,cnfs_month_2")
    assert len(ou_path.read_text().strip().splitlines()) == 12
    import json

    payload = json.loads(js_path.read_text())
    assert set(payload["monthly_cnfs"]) == {f"Thr{k}" for k in range(11)}


# --- episode metrics csv ---------------------------------------------------

def test_episode_metrics_csv_roundtrip(tmp_path):
    metrics = [em(1, 10.5, 2.25, over=3, under=1, dropped=2, claims=1),
               em(2, 0.0, 0.0)]
    path = tmp_path / "metrics.csv"
    write_episode_metrics_csv(metrics, path)
    loaded = read_episode_metrics_csv(path)
    assert loaded == metrics
