"""Reference scheduling policies sharing the agent's action interface.

A policy is a callable env -> action index. The heuristics look at the
environment state directly (they are not learners) and consider a queued job
schedulable only if it fits right now, at start offset 0; reserving future
rows is left to the learned agent.
"""
from __future__ import annotations

import numpy as np

from .env import ClusterEnv
from .errors import ConfigError
from .metrics import EpisodeReport, episode_report


def _fitting_slots(env: ClusterEnv) -> list[int]:
    return [i for i, job in env.queued_jobs() if env.image.fits_at(job, 0)]


def sjf_select(env: ClusterEnv) -> int:
    """Slot holding the shortest fitting job; ties break to the lowest slot;
    void when nothing fits."""
    best = None
    best_duration = None
    for i, job in env.queued_jobs():
        if not env.image.fits_at(job, 0):
            continue
        if best_duration is None or job.duration < best_duration:
            best, best_duration = i, job.duration
    return 0 if best is None else best + 1


def tetris_select(env: ClusterEnv, lam_short: float = 0.05) -> int:
    """Packing-plus-short-jobs score: cosine alignment between the current
    row's free-resource vector and the job demand, plus lam_short / duration."""
    free = env.free_row0()
    free_norm = float(np.linalg.norm(free))
    best = None
    best_score = None
    for i, job in env.queued_jobs():
        if not env.image.fits_at(job, 0):
            continue
        demand = np.asarray(job.demand, dtype=np.float64)
        norm = free_norm * float(np.linalg.norm(demand))
        alignment = float(free @ demand) / norm if norm > 0 else 0.0
        score = alignment + lam_short / job.duration
        if best_score is None or score > best_score:
            best, best_score = i, score
    return 0 if best is None else best + 1


def random_select(env: ClusterEnv, rng: np.random.Generator) -> int:
    """Uniform over the fitting slots plus the void action."""
    choices = [0] + [i + 1 for i in _fitting_slots(env)]
    return int(choices[rng.integers(len(choices))])


def make_policy(kind: str, rng: np.random.Generator | None = None,
                agent=None, lam_short: float = 0.05):
    """Build a policy callable. `random` needs an rng; `a2c` needs a trained
    agent (greedy action selection)."""
    if kind == "sjf":
        return sjf_select
    if kind == "tetris":
        return lambda env: tetris_select(env, lam_short=lam_short)
    if kind == "random":
        if rng is None:
            raise ConfigError("random policy needs an rng")
        return lambda env: random_select(env, rng)
    if kind == "a2c":
        if agent is None:
            raise ConfigError("a2c policy needs a trained agent")
        return lambda env: agent.act(env.encode_state(), mode="greedy")
    raise ConfigError(f"unknown policy kind {kind!r}")


def run_greedy(policy, env: ClusterEnv, gamma: float = 0.99) -> EpisodeReport:
    """Drive a reset environment with `policy` until the episode ends.
    Non-void actions pack jobs within the current step; void advances time."""
    rewards = []
    while not env.is_done():
        outcome = env.step(policy(env))
        rewards.append(outcome.reward)
    return episode_report(env.completed, rewards, gamma, total_jobs=len(env.jobs))
