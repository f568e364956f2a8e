"""DQN agent: replay buffer, epsilon-greedy exploration, TD targets, training.

The training loop follows the classic recipe: per environment step, push the
transition into a bounded FIFO replay memory, draw a uniform minibatch,
regress the taken action's Q-value toward ``r + gamma * max_a' Q_target(s')``
with one Adam step, and refresh the target network every ``target_sync``
gradient steps.

The loop is written against a tiny episode protocol so the same trainer runs
both the alert environment and small tabular test MDPs::

    episode.reset(rng)        -> state vector
    episode.step(action, rng) -> (next state vector, reward, done)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .env import AlertEnv, EnvConfig
from .errors import ConfigError, TrainingDiverged
from .stream import TransactionStream


@dataclass(frozen=True)
class Experience:
    """One stored transition."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform sampling (with replacement)."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity <= 0:
            raise ConfigError("replay capacity must be positive")
        self.capacity = capacity
        self._states = np.empty((capacity, state_dim))
        self._actions = np.empty(capacity, dtype=np.int64)
        self._rewards = np.empty(capacity)
        self._next_states = np.empty((capacity, state_dim))
        self._terminals = np.empty(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, state, action, reward, next_state, terminal) -> None:
        i = self._next
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_states[i] = next_state
        self._terminals[i] = terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def push_experience(self, exp: Experience) -> None:
        self.push(exp.state, exp.action, exp.reward, exp.next_state, exp.terminal)

    def sample(self, m: int, rng: np.random.Generator):
        """Uniform sample of ``m`` transitions; returns column arrays."""
        if self._size == 0:
            raise RuntimeError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self._size, size=m)
        return (
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
            self._terminals[idx],
        )

    def contents(self):
        """Current transitions in FIFO order (oldest first); for tests/audits."""
        if self._size < self.capacity:
            order = np.arange(self._size)
        else:
            order = (np.arange(self.capacity) + self._next) % self.capacity
        return [
            Experience(
                self._states[i].copy(),
                int(self._actions[i]),
                float(self._rewards[i]),
                self._next_states[i].copy(),
                bool(self._terminals[i]),
            )
            for i in order
        ]


@dataclass(frozen=True)
class TrainConfig:
    """DQN hyperparameters; defaults reproduce the reference experiment."""

    gamma: float = 0.9
    epsilon_start: float = 0.5
    epsilon_decay: float = 0.05  # per-iteration decay rate
    epsilon_floor: float = 0.1
    # "multiplicative": eps_i = start * (1-decay)^i; "absolute": start - decay*i
    epsilon_decay_mode: str = "multiplicative"
    buffer_capacity: int = 160_000
    minibatch_size: int = 1024
    total_iterations: int = 100
    target_sync: int = 500  # gradient steps between target-network refreshes
    learning_rate: float = 1e-4
    hidden_sizes: tuple = (20, 10)

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 <= self.epsilon_floor <= self.epsilon_start <= 1.0:
            raise ConfigError("require 0 <= epsilon_floor <= epsilon_start <= 1")
        if self.epsilon_decay_mode not in ("multiplicative", "absolute"):
            raise ConfigError("epsilon_decay_mode must be 'multiplicative' or 'absolute'")
        if self.minibatch_size > self.buffer_capacity:
            raise ConfigError("minibatch_size must not exceed buffer_capacity")
        if self.total_iterations < 0:
            raise ConfigError("total_iterations must be >= 0")
        if self.target_sync <= 0:
            raise ConfigError("target_sync must be positive")


def epsilon_at(iteration: int, config: TrainConfig) -> float:
    """Exploration probability for a training iteration."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    if config.epsilon_decay_mode == "absolute":
        eps = config.epsilon_start - config.epsilon_decay * iteration
    else:
        eps = config.epsilon_start * (1.0 - config.epsilon_decay) ** iteration
    return max(config.epsilon_floor, eps)


def select_action(params: nn.MlpParams, state_vec, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over the Q-network; argmax ties break to the lowest index."""
    num_actions = params.layer_sizes[-1]
    if rng.random() < epsilon:
        return int(rng.integers(0, num_actions))
    q = nn.forward(params, state_vec)
    return int(np.argmax(q))  # np.argmax returns the first (lowest) max index


def td_targets(rewards, next_states, terminals, target_params: nn.MlpParams,
               gamma: float) -> np.ndarray:
    """Regression targets: r, plus gamma * max_a' Q_target(s') when non-terminal."""
    r = np.asarray(rewards, dtype=np.float64).ravel()
    if r.size == 0:
        raise ValueError("empty batch")
    term = np.asarray(terminals, dtype=bool).ravel()
    q_next = nn.forward(target_params, np.atleast_2d(next_states))
    return r + gamma * np.where(term, 0.0, q_next.max(axis=1))


def greedy_policy(params: nn.MlpParams):
    """Deterministic argmax policy over the network's Q-values."""

    def policy(state_vec) -> int:
        return int(np.argmax(nn.forward(params, state_vec)))

    return policy


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    mean_reward: float  # mean per-episode total reward this iteration
    mean_loss: float
    epsilon: float


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    def append(self, stats: IterationStats) -> None:
        self.rows.append(stats)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "mean_reward", "mean_loss", "epsilon"])
            for s in self.rows:
                writer.writerow(
                    [s.iteration, f"{s.mean_reward:.6f}", f"{s.mean_loss:.8f}",
                     f"{s.epsilon:.6f}"]
                )


def train_dqn(episode_factories, state_dim: int, num_actions: int,
              config: TrainConfig, seed: int):
    """Run the full DQN training loop.

    ``episode_factories`` is a sequence of zero-argument callables, one per
    episode (day); each call returns a fresh episode object implementing the
    reset/step protocol.  Returns ``(params, TrainingLog)``.
    """
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    layer_sizes = [state_dim, *config.hidden_sizes, num_actions]
    init_seed = int(
        np.random.SeedSequence(entropy=seed, spawn_key=(1,)).generate_state(1)[0]
    )
    params = nn.init_params(layer_sizes, init_seed)
    target_params = params
    adam = nn.adam_init(params, lr=config.learning_rate)
    buffer = ReplayBuffer(config.buffer_capacity, state_dim)
    log = TrainingLog()
    grad_steps = 0

    for iteration in range(config.total_iterations):
        eps = epsilon_at(iteration, config)
        episode_rewards = []
        losses = []
        for make_episode in episode_factories:
            episode = make_episode()
            state = np.asarray(episode.reset(rng), dtype=np.float64)
            done = False
            total_reward = 0.0
            while not done:
                action = select_action(params, state, eps, rng)
                next_state, reward, done = episode.step(action, rng)
                next_state = np.asarray(next_state, dtype=np.float64)
                total_reward += reward
                buffer.push(state, action, reward, next_state, done)

                b_s, b_a, b_r, b_s2, b_t = buffer.sample(config.minibatch_size, rng)
                targets = td_targets(b_r, b_s2, b_t, target_params, config.gamma)
                grads, loss = nn.mse_grad(params, b_s, targets, b_a)
                if not np.isfinite(loss):
                    raise TrainingDiverged(
                        f"non-finite loss at iteration {iteration}, "
                        f"gradient step {grad_steps}, epsilon {eps:.4f}"
                    )
                params, adam = nn.adam_step(params, grads, adam)
                grad_steps += 1
                if grad_steps % config.target_sync == 0:
                    target_params = params
                losses.append(loss)
                state = next_state
            episode_rewards.append(total_reward)
        log.append(
            IterationStats(
                iteration=iteration,
                mean_reward=float(np.mean(episode_rewards)) if episode_rewards else 0.0,
                mean_loss=float(np.mean(losses)) if losses else 0.0,
                epsilon=eps,
            )
        )
    return params, log


class DayEpisode:
    """Adapter exposing one alert-environment day through the episode protocol."""

    def __init__(self, env_config: EnvConfig, day_transactions: TransactionStream):
        self._config = env_config
        self._day = day_transactions
        self._env = None
        self._state = None

    def reset(self, rng) -> np.ndarray:
        self._env = AlertEnv(self._config)
        self._state = self._env.reset(self._day)
        return self._env.normalize_state(self._state)

    def step(self, action: int, rng):
        outcome = self._env.step(self._state, action, rng)
        self._state = outcome.next_state
        return self._env.normalize_state(outcome.next_state), outcome.reward, outcome.done

    @property
    def env(self) -> AlertEnv:
        return self._env


def train_on_stream(train_stream: TransactionStream, env_config: EnvConfig,
                    config: TrainConfig, seed: int):
    """Train the threshold-selection agent on every day of ``train_stream``.

    Each calendar day of the stream is one episode of 24 hourly decisions.
    Returns ``(params, TrainingLog)``.
    """
    if len(train_stream) == 0:
        raise ValueError("train stream is empty")
    env_config.validate()
    day_streams = [
        train_stream.select_days(int(d), int(d)) for d in train_stream.days
    ]
    factories = [
        (lambda ds=ds: DayEpisode(env_config, ds)) for ds in day_streams
    ]
    return train_dqn(
        factories,
        state_dim=5,
        num_actions=env_config.num_actions,
        config=config,
        seed=seed,
    )
