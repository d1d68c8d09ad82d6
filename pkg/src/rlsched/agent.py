"""Advantage actor-critic scheduling agent.

Two separate networks: a policy (softmax over void + queue slots) and a
state-value critic. Training collects short on-policy segments and applies
one SGD step per segment on each network: the critic descends the squared
n-step TD error, the actor descends -log pi(a|s) * advantage with an
optional entropy bonus. Advantages are constants during the actor step; a
terminal successor state always bootstraps as zero.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EnvConfig
from .env import ClusterEnv
from .errors import ConfigError, TrainingDiverged
from .metrics import EpisodeReport, episode_report
from .nn import Network, conv3, dense, flatten, maxpool2, softmax
from .nn.checkpoint import load_params, save_params

ARCHITECTURE_NAMES = ("fc", "conv16", "conv32", "conv16_pool", "conv32_pool")

LOSS_LIMIT = 1e6


def architecture_chain(name: str, fc_hidden: int = 128):
    """Feature chains for the supported network families (head not included)."""
    if name == "fc":
        return [flatten(), dense(fc_hidden, activation="relu")]
    if name == "conv16":
        return [conv3(16, activation="relu"), flatten()]
    if name == "conv32":
        return [conv3(32, activation="relu"), flatten()]
    if name == "conv16_pool":
        return [conv3(16, activation="relu"), maxpool2(), flatten()]
    if name == "conv32_pool":
        return [conv3(32, activation="relu"), maxpool2(), flatten()]
    raise ConfigError(f"unknown architecture {name!r}; pick from {ARCHITECTURE_NAMES}")


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    n_steps: int = 5
    entropy_coeff: float = 0.01
    architecture: str = "conv16"
    action_mode: str = "sample"  # sample | greedy
    fc_hidden: int = 128
    init_scale: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.lr_actor <= 0 or self.lr_critic <= 0:
            raise ConfigError("learning rates must be positive")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.entropy_coeff < 0:
            raise ConfigError("entropy_coeff must be >= 0")
        if self.action_mode not in ("sample", "greedy"):
            raise ConfigError(f"unknown action_mode {self.action_mode!r}")


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


def td_error(transition: Transition, gamma: float, value_fn) -> float:
    """delta = R + gamma * v(S') - v(S), with v(S') treated as 0 when S' is
    terminal regardless of what the network would output."""
    bootstrap = 0.0 if transition.done else value_fn(transition.next_state)
    return transition.reward + gamma * bootstrap - value_fn(transition.state)


def n_step_returns(segment, gamma: float, value_fn, n: int):
    """Per-step n-step TD targets and advantages over a contiguous segment.

    target_t sums up to n discounted rewards and bootstraps from the value of
    the state where the window ends; a segment ending in a terminal
    transition bootstraps as zero there. Segments must not cross episode
    boundaries.
    """
    if not segment:
        raise ValueError("segment must be non-empty")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    length = len(segment)
    targets = np.empty(length, dtype=np.float64)
    advantages = np.empty(length, dtype=np.float64)
    for t in range(length):
        m = min(n, length - t)
        acc = 0.0
        discount = 1.0
        for k in range(m):
            acc += discount * segment[t + k].reward
            discount *= gamma
        if t + m == length:
            last = segment[-1]
            bootstrap = 0.0 if last.done else value_fn(last.next_state)
        else:
            bootstrap = value_fn(segment[t + m].state)
        targets[t] = acc + discount * bootstrap
        advantages[t] = targets[t] - value_fn(segment[t].state)
    return targets, advantages


class ActorCriticAgent:
    """Policy + value networks over the environment's state encoding."""

    def __init__(self, observation_shape, num_actions, config=None, seed=0,
                 chain=None):
        self.config = config or AgentConfig()
        self.observation_shape = tuple(observation_shape)
        self.num_actions = int(num_actions)
        input_shape = (1,) + self.observation_shape
        if chain is None:
            chain = architecture_chain(self.config.architecture,
                                       self.config.fc_hidden)
        seeds = np.random.SeedSequence(seed).spawn(3)
        self.actor = Network(
            list(chain) + [dense(self.num_actions)],
            input_shape,
            seed=seeds[0],
            init_scale=self.config.init_scale,
        )
        self.critic = Network(
            list(chain) + [dense(1)],
            input_shape,
            seed=seeds[1],
            init_scale=self.config.init_scale,
        )
        self.rng = np.random.default_rng(seeds[2])

    # -- evaluation ------------------------------------------------------------

    def _batch(self, state: np.ndarray) -> np.ndarray:
        return np.asarray(state)[None, None, :, :]

    def policy(self, state: np.ndarray) -> np.ndarray:
        logits, _ = self.actor.forward(self._batch(state))
        return softmax(logits[0])

    def value(self, state: np.ndarray) -> float:
        out, _ = self.critic.forward(self._batch(state))
        return float(out[0, 0])

    def select_action(self, probs: np.ndarray, mode: str | None = None) -> int:
        mode = mode or self.config.action_mode
        if mode == "greedy":
            return int(np.argmax(probs))  # argmax takes the first max on ties
        return int(self.rng.choice(len(probs), p=probs))

    def act(self, state: np.ndarray, mode: str | None = None) -> int:
        return self.select_action(self.policy(state), mode)

    # -- learning ----------------------------------------------------------------

    def update(self, segment) -> dict:
        """One critic step and one actor step from a trajectory segment.
        Returns diagnostics evaluated before the parameter updates."""
        if not segment:
            raise ValueError("segment must be non-empty")
        cfg = self.config
        length = len(segment)
        states = np.stack([tr.state for tr in segment])[:, None, :, :]
        actions = np.array([tr.action for tr in segment])

        # One batched critic pass covers every value the targets need (all
        # segment states plus the final bootstrap state); n_step_returns then
        # reads them back through an identity-keyed lookup.
        all_states = np.concatenate(
            [states, self._batch(segment[-1].next_state)], axis=0
        )
        v_out, v_caches = self.critic.forward(all_states)
        values = v_out[:, 0].astype(np.float64)
        lookup = {id(tr.state): values[t] for t, tr in enumerate(segment)}
        lookup[id(segment[-1].next_state)] = values[length]
        targets, advantages = n_step_returns(
            segment, cfg.gamma, lambda s: lookup[id(s)], cfg.n_steps
        )

        critic_loss = float(((values[:length] - targets) ** 2).sum())
        dv = np.zeros((length + 1, 1))
        dv[:length, 0] = 2.0 * (values[:length] - targets)
        critic_grads, _ = self.critic.backward(v_caches, dv)

        logits, a_caches = self.actor.forward(states)
        probs = softmax(logits)
        # floor keeps 0 * log(0) at 0 when the policy saturates
        log_probs = np.log(np.maximum(probs, 1e-300))
        entropy = -(probs * log_probs).sum(axis=1)
        chosen = log_probs[np.arange(length), actions]
        actor_loss = float(
            -(chosen * advantages).sum() - cfg.entropy_coeff * entropy.sum()
        )
        one_hot = np.zeros_like(probs)
        one_hot[np.arange(length), actions] = 1.0
        dlogits = advantages[:, None] * (probs - one_hot)
        if cfg.entropy_coeff:
            dlogits += cfg.entropy_coeff * probs * (log_probs + entropy[:, None])
        actor_grads, _ = self.actor.backward(a_caches, dlogits)

        if (
            not math.isfinite(actor_loss)
            or not math.isfinite(critic_loss)
            or abs(actor_loss) > LOSS_LIMIT
            or abs(critic_loss) > LOSS_LIMIT
        ):
            raise TrainingDiverged(
                f"actor_loss={actor_loss!r} critic_loss={critic_loss!r}"
            )

        self.critic.sgd_step(critic_grads, cfg.lr_critic)
        self.actor.sgd_step(actor_grads, cfg.lr_actor)
        return {
            "actor_loss": actor_loss,
            "critic_loss": critic_loss,
            "entropy": float(entropy.mean()),
            "mean_advantage": float(advantages.mean()),
        }

    # -- persistence -----------------------------------------------------------

    def save(self, directory: str | Path) -> None:
        """Checkpoint: one parameter file per network plus the agent config."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_params(self.actor, directory / "actor.npz")
        save_params(self.critic, directory / "critic.npz")
        with open(directory / "agent.json", "w") as fh:
            json.dump(dataclasses.asdict(self.config), fh, indent=2,
                      sort_keys=True)
            fh.write("\n")

    def load(self, directory: str | Path) -> None:
        directory = Path(directory)
        meta_path = directory / "agent.json"
        if meta_path.exists():
            with open(meta_path) as fh:
                stored = json.load(fh)
            if stored.get("architecture") != self.config.architecture:
                raise ConfigError(
                    f"checkpoint was trained with architecture "
                    f"{stored.get('architecture')!r}, agent uses "
                    f"{self.config.architecture!r}"
                )
        load_params(self.actor, directory / "actor.npz")
        load_params(self.critic, directory / "critic.npz")


@dataclass
class EpisodeRecord:
    episode: int
    steps: int
    updates: int
    total_reward: float
    discounted_reward: float
    avg_slowdown: float | None
    avg_completion_time: float | None
    avg_waiting_time: float | None
    completed: int
    truncated: bool
    actor_loss: float
    critic_loss: float
    entropy: float
    mean_advantage: float


TRAINING_LOG_COLUMNS = [f.name for f in dataclasses.fields(EpisodeRecord)]


@dataclass
class EpisodeRun:
    report: EpisodeReport
    diagnostics: dict
    steps: int
    updates: int
    total_reward: float


class _LogWriter:
    """Append-only CSV training log, one row per episode."""

    def __init__(self, path):
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(TRAINING_LOG_COLUMNS)

    def write(self, record: "EpisodeRecord") -> None:
        row = []
        for name in TRAINING_LOG_COLUMNS:
            value = getattr(record, name)
            if value is None:
                row.append("")
            elif isinstance(value, bool):
                row.append(int(value))
            elif isinstance(value, float):
                row.append(f"{value:.10g}")
            else:
                row.append(value)
        self.writer.writerow(row)
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def run_episode(env: ClusterEnv, agent: ActorCriticAgent, jobs, seed: int,
                learn: bool = True, mode: str | None = None) -> EpisodeRun:
    """Roll one episode; when learning, update every n_steps and at episode
    end, whichever comes first."""
    cfg = agent.config
    env.reset(jobs, seed=seed)
    obs = env.encode_state()
    segment: list[Transition] = []
    rewards: list[float] = []
    sums = {"actor_loss": 0.0, "critic_loss": 0.0, "entropy": 0.0,
            "mean_advantage": 0.0}
    updates = 0
    steps = 0
    while not env.is_done():
        action = agent.act(obs, mode=mode)
        outcome = env.step(action)
        rewards.append(outcome.reward)
        steps += 1
        if learn:
            segment.append(
                Transition(obs, action, outcome.reward, outcome.observation,
                           outcome.done)
            )
            if len(segment) >= cfg.n_steps or outcome.done:
                diag = agent.update(segment)
                for key in sums:
                    sums[key] += diag[key]
                updates += 1
                segment = []
        obs = outcome.observation
    report = episode_report(env.completed, rewards, cfg.gamma,
                            total_jobs=len(env.jobs))
    if updates:
        for key in sums:
            sums[key] /= updates
    return EpisodeRun(report, sums, steps, updates, float(sum(rewards)))


def train(env_config: EnvConfig, sequences, agent_config: AgentConfig,
          episodes: int, seed: int = 0, agent: ActorCriticAgent | None = None,
          checkpoint_dir: str | Path | None = None, checkpoint_every: int = 0,
          log_path: str | Path | None = None):
    """Algorithm: loop over episodes, cycling through the given job
    sequences, sampling actions from the current policy and updating both
    networks every n_steps transitions. Deterministic given the seed.

    Returns (list of EpisodeRecord, trained agent).
    """
    if not sequences:
        raise ConfigError("need at least one job sequence to train on")
    env = ClusterEnv(env_config)
    if agent is None:
        agent = ActorCriticAgent(
            env.observation_shape(),
            env_config.queue_slots + 1,
            config=agent_config,
            seed=seed,
        )
    records: list[EpisodeRecord] = []
    writer = _LogWriter(log_path) if log_path else None
    try:
        for episode in range(episodes):
            jobs = sequences[episode % len(sequences)]
            try:
                run = run_episode(env, agent, jobs, seed=episode, learn=True)
            except TrainingDiverged as exc:
                raise TrainingDiverged(str(exc), episode=episode) from exc
            report, diag = run.report, run.diagnostics
            record = EpisodeRecord(
                episode=episode,
                steps=run.steps,
                updates=run.updates,
                total_reward=run.total_reward,
                discounted_reward=report.total_discounted_reward,
                avg_slowdown=report.avg_slowdown,
                avg_completion_time=report.avg_completion_time,
                avg_waiting_time=report.avg_waiting_time,
                completed=report.completed_count,
                truncated=report.truncated,
                actor_loss=diag["actor_loss"],
                critic_loss=diag["critic_loss"],
                entropy=diag["entropy"],
                mean_advantage=diag["mean_advantage"],
            )
            records.append(record)
            if writer:
                writer.write(record)
            if checkpoint_dir and checkpoint_every and (
                (episode + 1) % checkpoint_every == 0
            ):
                agent.save(Path(checkpoint_dir) / f"episode_{episode + 1:06d}")
        if checkpoint_dir:
            agent.save(Path(checkpoint_dir) / "final")
    finally:
        if writer:
            writer.close()
    return records, agent
