"""Evaluation metrics and static-threshold baselines.

All metrics are computed from full day-end ground truth (including
claim-reported fraud), never from the partially-resolved amounts that feed the
training reward.  Net fraud savings for a day is caught fraud dollars minus
missed fraud dollars; false-positive alerts carry no dollar penalty and only
show up in the over-alert counts.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .env import AlertEnv, EnvConfig, HOURS_PER_DAY, STEP_LOG_HEADER, format_step_log_row
from .stream import TransactionStream

# Calendar used to map 1-based day indices to months (non-leap year, cycling).
MONTH_LENGTHS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
_MONTH_EDGES = np.cumsum(MONTH_LENGTHS)


def month_of_day(day: int) -> int:
    """Calendar month (1..12) of a 1-based day index; wraps after day 365."""
    if day < 1:
        raise ValueError("day indices are 1-based")
    d = (day - 1) % 365 + 1
    return int(np.searchsorted(_MONTH_EDGES, d, side="left")) + 1


@dataclass(frozen=True)
class EpisodeMetrics:
    """Per-day outcome of running a policy through the alert environment."""

    day: int
    fraud_savings: float
    fraud_losses: float
    over_alerts: int
    under_alerts: int
    dropped: int
    claim_reported: int

    @property
    def net(self) -> float:
        return self.fraud_savings - self.fraud_losses


def _as_policy(policy):
    """Accept a static threshold index or a state-vector -> action callable."""
    if callable(policy):
        return policy
    idx = int(policy)
    return lambda state_vec: idx


def run_policy(policy, stream: TransactionStream, env_config: EnvConfig, seed: int,
               step_log=None):
    """Simulate every day of ``stream`` under ``policy``.

    ``policy`` is either a fixed threshold index or a greedy-policy callable.
    Environment randomness is seeded per day, so distinct days are independent
    of evaluation order.  If ``step_log`` is a list, one audit line per env
    step is appended to it.  Returns a list of ``EpisodeMetrics``.
    """
    act = _as_policy(policy)
    results = []
    for day in stream.days:
        day = int(day)
        env = AlertEnv(env_config)
        state = env.reset(stream.select_days(day, day))
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(day, 0))
        )
        done = False
        while not done:
            action = act(env.normalize_state(state))
            outcome = env.step(state, action, rng)
            if step_log is not None:
                step_log.append(format_step_log_row(day, state.hour, action, outcome))
            state = outcome.next_state
            done = outcome.done
        truth = env.day_ground_truth()
        results.append(
            EpisodeMetrics(
                day=day,
                fraud_savings=truth.total_fraud_caught,
                fraud_losses=truth.total_fraud_missed,
                over_alerts=truth.over_alerts,
                under_alerts=truth.under_alerts,
                dropped=truth.dropped,
                claim_reported=truth.claim_reported,
            )
        )
    return results


def cnfs(metrics, up_to_day=None) -> float:
    """Cumulative net fraud savings through ``up_to_day`` (default: all days)."""
    total = 0.0
    for m in metrics:
        if up_to_day is None or m.day <= up_to_day:
            total += m.net
    return total


def relative_improvement(policy_cnfs: float, baseline_cnfs: float) -> float:
    """Percentage improvement of ``policy_cnfs`` over ``baseline_cnfs``."""
    if baseline_cnfs == 0:
        raise ZeroDivisionError("relative improvement undefined for a zero baseline")
    return (policy_cnfs - baseline_cnfs) / baseline_cnfs * 100.0


def over_under_totals(metrics) -> dict:
    """Summed over/under-alert counts; the headline figure is their sum."""
    over = sum(m.over_alerts for m in metrics)
    under = sum(m.under_alerts for m in metrics)
    return {"over": over, "under": under, "sum": over + under}


def monthly_net(metrics) -> dict:
    """Net fraud savings per calendar month (month -> dollars)."""
    totals: dict = {}
    for m in metrics:
        month = month_of_day(m.day)
        totals[month] = totals.get(month, 0.0) + m.net
    return totals


def best_static_by_month(stream: TransactionStream, env_config: EnvConfig, seed: int):
    """Per calendar month, the static threshold index with the highest net savings.

    Ties go to the lower index.  Returns a list of (month, threshold_index)
    in month order.
    """
    per_threshold = {
        k: monthly_net(run_policy(k, stream, env_config, seed))
        for k in range(env_config.num_actions)
    }
    months = sorted({month_of_day(int(d)) for d in stream.days})
    winners = []
    for month in months:
        best = max(
            range(env_config.num_actions),
            key=lambda k: (per_threshold[k].get(month, 0.0), -k),
        )
        winners.append((month, best))
    return winners


def policy_heatmap(policy, stream: TransactionStream, env_config: EnvConfig,
                   seed: int) -> np.ndarray:
    """24 x K matrix: fraction of days on which action k was chosen at hour h."""
    act = _as_policy(policy)
    counts = np.zeros((HOURS_PER_DAY, env_config.num_actions))
    days = stream.days
    for day in days:
        day = int(day)
        env = AlertEnv(env_config)
        state = env.reset(stream.select_days(day, day))
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(day, 0))
        )
        done = False
        while not done:
            action = act(env.normalize_state(state))
            counts[state.hour - 1, action] += 1
            outcome = env.step(state, action, rng)
            state = outcome.next_state
            done = outcome.done
    if len(days):
        counts /= len(days)
    return counts


DYNAMIC_POLICY = "dynamic"


@dataclass
class ComparisonReport:
    """Cross-policy comparison over a test stream.

    ``monthly_cnfs[name][month]`` holds CNFS evaluated at that month's end
    (cumulative over the whole test span up to and including the month);
    ``improvements`` are percentages relative to ``baseline`` at each month
    end.  Policy names are ``Thr0..Thr{K-1}`` plus ``dynamic``.
    """

    months: list
    monthly_cnfs: dict
    improvements: dict
    over_under: dict  # name -> {month -> combined count}
    best_static: list  # (month, threshold index)
    baseline: str

    @property
    def policies(self):
        return list(self.monthly_cnfs.keys())

    def to_json(self, path) -> None:
        payload = {
            "months": self.months,
            "baseline": self.baseline,
            "monthly_cnfs": self.monthly_cnfs,
            "improvements": self.improvements,
            "over_under": self.over_under,
            "best_static_by_month": [
                {"month": m, "threshold": k} for m, k in self.best_static
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_cnfs_table(self, path) -> None:
        """Delimited table: per-policy CNFS at month ends plus improvements."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["policy"]
            header += [f"cnfs_month_{m}" for m in self.months]
            header += [f"improvement_month_{m}_pct" for m in self.months]
            writer.writerow(header)
            for name in self.policies:
                row = [name]
                row += [f"{self.monthly_cnfs[name][m]:.2f}" for m in self.months]
                row += [
                    "-" if name == self.baseline
                    else f"{self.improvements[name][m]:.2f}"
                    for m in self.months
                ]
                writer.writerow(row)

    def write_over_under_table(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["policy"] + [f"month_{m}" for m in self.months])
            for name in self.policies:
                writer.writerow(
                    [name] + [self.over_under[name][m] for m in self.months]
                )

    def write_best_static_table(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["month", "best_static_threshold"])
            for month, k in self.best_static:
                writer.writerow([month, f"Thr{k}"])


def static_name(k: int) -> str:
    return f"Thr{k}"


def build_comparison(dynamic_policy, test_stream: TransactionStream,
                     env_config: EnvConfig, seed: int,
                     baseline_threshold: int | None = None) -> ComparisonReport:
    """Evaluate the dynamic policy against every static threshold.

    ``baseline_threshold`` defaults to the highest cutoff (the last index).
    """
    if baseline_threshold is None:
        baseline_threshold = env_config.num_actions - 1
    baseline = static_name(baseline_threshold)

    all_metrics = {
        static_name(k): run_policy(k, test_stream, env_config, seed)
        for k in range(env_config.num_actions)
    }
    if dynamic_policy is not None:
        all_metrics[DYNAMIC_POLICY] = run_policy(
            dynamic_policy, test_stream, env_config, seed
        )

    months = sorted({month_of_day(int(d)) for d in test_stream.days})
    month_last_day = {
        m: max(int(d) for d in test_stream.days if month_of_day(int(d)) == m)
        for m in months
    }

    monthly_cnfs = {}
    over_under = {}
    for name, metrics in all_metrics.items():
        monthly_cnfs[name] = {
            m: cnfs(metrics, up_to_day=month_last_day[m]) for m in months
        }
        combined = {}
        for m in months:
            month_metrics = [x for x in metrics if month_of_day(x.day) == m]
            combined[m] = over_under_totals(month_metrics)["sum"]
        over_under[name] = combined

    improvements = {}
    for name in all_metrics:
        if name == baseline:
            improvements[name] = {m: 0.0 for m in months}
        else:
            improvements[name] = {
                m: relative_improvement(
                    monthly_cnfs[name][m], monthly_cnfs[baseline][m]
                )
                for m in months
            }

    best_static = best_static_by_month(test_stream, env_config, seed)
    return ComparisonReport(
        months=months,
        monthly_cnfs=monthly_cnfs,
        improvements=improvements,
        over_under=over_under,
        best_static=best_static,
        baseline=baseline,
    )


def write_heatmap_csv(matrix: np.ndarray, env_config: EnvConfig, path) -> None:
    """Export a 24 x K selection-frequency matrix as delimited text."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour"] + [static_name(k) for k in range(matrix.shape[1])])
        for h in range(matrix.shape[0]):
            writer.writerow([h + 1] + [f"{v:.6f}" for v in matrix[h]])


def write_episode_metrics_csv(metrics, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["day", "fraud_savings", "fraud_losses", "net", "over_alerts",
             "under_alerts", "dropped", "claim_reported"]
        )
        for m in metrics:
            writer.writerow(
                [m.day, f"{m.fraud_savings:.2f}", f"{m.fraud_losses:.2f}",
                 f"{m.net:.2f}", m.over_alerts, m.under_alerts, m.dropped,
                 m.claim_reported]
            )


def read_episode_metrics_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                EpisodeMetrics(
                    day=int(row["day"]),
                    fraud_savings=float(row["fraud_savings"]),
                    fraud_losses=float(row["fraud_losses"]),
                    over_alerts=int(row["over_alerts"]),
                    under_alerts=int(row["under_alerts"]),
                    dropped=int(row["dropped"]),
                    claim_reported=int(row["claim_reported"]),
                )
            )
    return out


def write_step_log(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write(STEP_LOG_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
