"""Capacity-constrained hourly alert environment.

One episode is one day of 24 hourly decisions.  Each hour the agent picks a
score threshold; transactions scoring above it become alert candidates,
processed in stream order until the day's alert capacity is exhausted.
Candidates beyond the remaining capacity are dropped and their fraud becomes a
loss, as does fraud that never alerted.  A processed alert resolves within the
hour with probability ``p_resolve_within_hour``; only resolved amounts enter
the hourly reward, while full ground truth is tallied separately for metrics.

Reward for hour H: ``(dS - dL) * H / money_scale`` where dS / dL are the
hour's resolved saving / loss increments.  The H factor weights late-day hours
up so the agent does not spend all capacity early.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LifecycleError
from .stream import TransactionStream

DEFAULT_THRESHOLDS = tuple(range(56, 67))  # 11 actions, scores 56..66
HOURS_PER_DAY = 24


@dataclass(frozen=True)
class EnvConfig:
    """Alert-system parameters.

    ``money_scale`` normalizes the reward, ``money_scale_state`` the S/L state
    features; both default to roughly the 95th percentile of daily fraud
    dollars under the default calibration (see ``suggest_money_scale``).
    """

    c_max: int = 500
    thresholds: tuple = DEFAULT_THRESHOLDS
    money_scale: float = 11000.0
    money_scale_state: float = 11000.0
    p_resolve_within_hour: float = 0.9
    p_claim_report: float = 0.1
    # Open design switch: also credit unresolved true-fraud alerts to the
    # hourly reward instead of deferring them to day-end metrics.
    count_unresolved_in_reward: bool = False

    def validate(self) -> None:
        if self.c_max <= 0:
            raise ConfigError("c_max must be positive")
        thr = tuple(self.thresholds)
        if len(thr) < 2:
            raise ConfigError("thresholds must contain at least 2 cutoffs")
        if any(not 1 <= t <= 99 for t in thr):
            raise ConfigError("thresholds must lie in [1, 99]")
        if any(b <= a for a, b in zip(thr, thr[1:])):
            raise ConfigError("thresholds must be strictly increasing")
        if not 0.0 <= self.p_resolve_within_hour <= 1.0:
            raise ConfigError("p_resolve_within_hour must lie in [0, 1]")
        if not 0.0 <= self.p_claim_report <= 1.0:
            raise ConfigError("p_claim_report must lie in [0, 1]")
        if self.money_scale <= 0 or self.money_scale_state <= 0:
            raise ConfigError("money scales must be positive")

    @property
    def num_actions(self) -> int:
        return len(self.thresholds)


@dataclass(frozen=True)
class EnvState:
    """The agent's observation before an hourly decision."""

    hour: int  # 1..24
    caught_amount: float  # cumulative confirmed-fraud dollars today
    missed_amount: float  # cumulative missed-fraud dollars today
    capacity_used: int  # alerts processed today
    threshold_idx: int  # threshold applied in the previous hour


@dataclass(frozen=True)
class HourDetail:
    alerts_issued: int
    alerts_dropped: int
    fraud_caught_amount: float
    fraud_missed_amount: float
    false_positive_alerts: int


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    reward: float
    done: bool
    hour_detail: HourDetail


@dataclass(frozen=True)
class DayGroundTruth:
    """Full-information day tallies, independent of the resolution sampling."""

    total_fraud_caught: float
    total_fraud_missed: float
    over_alerts: int
    under_alerts: int
    dropped: int
    claim_reported: int


@dataclass
class _DayTally:
    caught: float = 0.0
    missed: float = 0.0
    over: int = 0
    under: int = 0
    dropped: int = 0
    claim_reported: int = 0


class AlertEnv:
    """One day-episode of the hourly alert MDP.

    ``reset`` loads a day's transactions, ``step`` advances one hour.  A single
    instance is single-threaded; run separate instances for parallel days.
    """

    def __init__(self, config: EnvConfig):
        config.validate()
        self.config = config
        self._hours = None
        self._state = None
        self._done = False
        self._tally = _DayTally()
        self._total_fraud_dollars = 0.0

    def reset(self, day_transactions: TransactionStream) -> EnvState:
        """Load one day's transactions and return the initial state."""
        days = np.unique(day_transactions.day)
        if len(days) > 1:
            raise ValueError(f"day_transactions spans multiple days: {days.tolist()}")
        # Per-hour column views, preserving stream order.
        self._hours = []
        for h in range(1, HOURS_PER_DAY + 1):
            idx = np.flatnonzero(day_transactions.hour == h)
            self._hours.append(
                (
                    day_transactions.score[idx],
                    day_transactions.amount[idx],
                    day_transactions.is_fraud[idx],
                )
            )
        self._total_fraud_dollars = float(
            day_transactions.amount[day_transactions.is_fraud].sum()
        )
        self._tally = _DayTally()
        self._done = False
        self._state = EnvState(
            hour=1,
            caught_amount=0.0,
            missed_amount=0.0,
            capacity_used=0,
            threshold_idx=self.config.num_actions - 1,  # most conservative cutoff
        )
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    def step(self, state: EnvState, action: int, rng: np.random.Generator) -> StepOutcome:
        """Apply ``thresholds[action]`` to the current hour's transactions."""
        if self._hours is None:
            raise LifecycleError("step called before reset")
        if self._done:
            raise LifecycleError("step called after the episode finished")
        if not 0 <= action < self.config.num_actions:
            raise ValueError(f"action {action} outside [0, {self.config.num_actions - 1}]")
        if not 1 <= state.hour <= HOURS_PER_DAY:
            raise ValueError(f"state.hour {state.hour} outside [1, 24]")

        cfg = self.config
        scores, amounts, fraud = self._hours[state.hour - 1]
        cand = scores > cfg.thresholds[action]
        cand_idx = np.flatnonzero(cand)
        remaining = cfg.c_max - state.capacity_used
        processed_idx = cand_idx[:remaining]
        dropped_idx = cand_idx[remaining:]
        n_processed = len(processed_idx)
        assert state.capacity_used + n_processed <= cfg.c_max

        proc_fraud = fraud[processed_idx]
        proc_amounts = amounts[processed_idx]
        resolved = rng.random(n_processed) < cfg.p_resolve_within_hour
        caught_resolved = float(proc_amounts[resolved & proc_fraud].sum())
        caught_pending = float(proc_amounts[~resolved & proc_fraud].sum())

        dropped_fraud_amount = float(amounts[dropped_idx][fraud[dropped_idx]].sum())
        unalerted = ~cand
        unalerted_fraud_idx = np.flatnonzero(unalerted & fraud)
        unalerted_fraud_amount = float(amounts[unalerted_fraud_idx].sum())
        claims = int((rng.random(len(unalerted_fraud_idx)) < cfg.p_claim_report).sum())
        missed = dropped_fraud_amount + unalerted_fraud_amount

        d_s = caught_resolved + (caught_pending if cfg.count_unresolved_in_reward else 0.0)
        d_l = missed
        reward = (d_s - d_l) * state.hour / cfg.money_scale

        # Full-information tallies (used by metrics, never by the reward).
        self._tally.caught += caught_resolved + caught_pending
        self._tally.missed += missed
        self._tally.over += int((~proc_fraud).sum()) + len(dropped_idx)
        self._tally.under += int(fraud[dropped_idx].sum()) + len(unalerted_fraud_idx)
        self._tally.dropped += len(dropped_idx)
        self._tally.claim_reported += claims

        done = state.hour == HOURS_PER_DAY
        next_state = EnvState(
            hour=state.hour + 1,  # 25 on the terminal state; never stepped again
            caught_amount=state.caught_amount + d_s,
            missed_amount=state.missed_amount + d_l,
            capacity_used=state.capacity_used + n_processed,
            threshold_idx=action,
        )
        self._done = done
        self._state = next_state
        return StepOutcome(
            next_state=next_state,
            reward=reward,
            done=done,
            hour_detail=HourDetail(
                alerts_issued=len(cand_idx),
                alerts_dropped=len(dropped_idx),
                fraud_caught_amount=d_s,
                fraud_missed_amount=d_l,
                false_positive_alerts=int((~proc_fraud).sum()),
            ),
        )

    def normalize_state(self, state: EnvState) -> np.ndarray:
        """Map a state to the network's 5 features, each in [0, 1]."""
        cfg = self.config
        return np.array(
            [
                min(state.hour, HOURS_PER_DAY) / HOURS_PER_DAY,
                min(state.caught_amount / cfg.money_scale_state, 1.0),
                min(state.missed_amount / cfg.money_scale_state, 1.0),
                state.capacity_used / cfg.c_max,
                state.threshold_idx / (cfg.num_actions - 1),
            ]
        )

    def day_ground_truth(self) -> DayGroundTruth:
        """Day tallies from full ground truth; only valid once the episode is done."""
        if not self._done:
            raise LifecycleError("day_ground_truth called before the episode finished")
        t = self._tally
        return DayGroundTruth(
            total_fraud_caught=t.caught,
            total_fraud_missed=t.missed,
            over_alerts=t.over,
            under_alerts=t.under,
            dropped=t.dropped,
            claim_reported=t.claim_reported,
        )

    @property
    def total_fraud_dollars(self) -> float:
        """Total fraud dollars in the loaded day (for conservation checks)."""
        return self._total_fraud_dollars


def suggest_money_scale(stream: TransactionStream, quantile: float = 0.95) -> float:
    """Quantile of daily fraud dollars over ``stream``; a stable reward scale."""
    days = stream.days
    if len(days) == 0:
        return 1.0
    totals = [
        float(stream.amount[(stream.day == d) & stream.is_fraud].sum()) for d in days
    ]
    return max(float(np.quantile(totals, quantile)), 1.0)


STEP_LOG_HEADER = "day,hour,action,alerts,dropped,caught,missed,reward"


def format_step_log_row(day, hour, action, outcome: StepOutcome) -> str:
    """One audit-log line per env step."""
    d = outcome.hour_detail
    return (
        f"{day},{hour},{action},{d.alerts_issued},{d.alerts_dropped},"
        f"{d.fraud_caught_amount:.2f},{d.fraud_missed_amount:.2f},{outcome.reward:.6f}"
    )
