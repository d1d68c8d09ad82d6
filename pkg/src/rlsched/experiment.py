"""Experiment sweeps: (policy x job rate x seed) cells, CSV results, and
plot-ready series.

Every cell is a pure function of the spec and its seeds: workloads are drawn
from a seed sequence derived from (seed, rate index, episode), so re-running
a sweep reproduces the result files byte for byte. All policies inside a cell
face identical workloads, which keeps cross-policy comparisons paired.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .agent import ActorCriticAgent, AgentConfig
from .baselines import make_policy, run_greedy
from .config import EnvConfig
from .env import ClusterEnv
from .errors import ConfigError
from .workload import WorkloadSpec, generate

EPISODE_COLUMNS = (
    "policy",
    "job_rate",
    "seed",
    "episode",
    "completed",
    "truncated",
    "avg_slowdown",
    "avg_completion_time",
    "avg_waiting_time",
    "discounted_reward",
)

SUMMARY_METRICS = (
    "avg_slowdown",
    "avg_completion_time",
    "avg_waiting_time",
    "discounted_reward",
)


@dataclass(frozen=True)
class ExperimentSpec:
    policies: tuple[str, ...] = ("random", "sjf", "tetris")
    job_rates: tuple[float, ...] = (0.7,)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    episodes: int = 20
    summary_window: int = 50
    gamma: float = 0.99
    lam_short: float = 0.05
    env: EnvConfig = field(default_factory=EnvConfig)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    agent: AgentConfig = field(default_factory=AgentConfig)
    checkpoint: str | None = None

    def __post_init__(self):
        if "a2c" in self.policies and not self.checkpoint:
            raise ConfigError("a2c policy requires a checkpoint path")
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _workload_seed(seed: int, rate_index: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, rate_index, episode]).generate_state(1)[0])


def config_hash(spec: ExperimentSpec) -> str:
    canonical = json.dumps(dataclasses.asdict(spec), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _build_policy(kind: str, spec: ExperimentSpec, env: ClusterEnv,
                  seed: int, rate_index: int):
    if kind == "random":
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, rate_index, 0xA5])
        )
        return make_policy("random", rng=rng)
    if kind == "a2c":
        agent = ActorCriticAgent(
            env.observation_shape(),
            spec.env.queue_slots + 1,
            config=spec.agent,
            seed=seed,
        )
        agent.load(spec.checkpoint)
        return make_policy("a2c", agent=agent)
    return make_policy(kind, lam_short=spec.lam_short)


def _run_cell(spec: ExperimentSpec, policy_kind: str, rate: float,
              rate_index: int, seed: int) -> list[dict]:
    env = ClusterEnv(spec.env)
    policy = _build_policy(policy_kind, spec, env, seed, rate_index)
    rows = []
    for episode in range(spec.episodes):
        wseed = _workload_seed(seed, rate_index, episode)
        jobs = generate(
            dataclasses.replace(spec.workload, rate=rate, seed=wseed), spec.env
        )
        env.reset(jobs, seed=wseed)
        report = run_greedy(policy, env, gamma=spec.gamma)
        rows.append(
            {
                "policy": policy_kind,
                "job_rate": rate,
                "seed": seed,
                "episode": episode,
                "completed": report.completed_count,
                "truncated": report.truncated,
                "avg_slowdown": report.avg_slowdown,
                "avg_completion_time": report.avg_completion_time,
                "avg_waiting_time": report.avg_waiting_time,
                "discounted_reward": report.total_discounted_reward,
            }
        )
    return rows


def _summarize(rows: list[dict], window: int) -> dict:
    tail = rows[-window:] if window > 0 else rows
    summary = {
        "policy": tail[0]["policy"],
        "job_rate": tail[0]["job_rate"],
        "seed": tail[0]["seed"],
        "episodes": len(rows),
        "window": len(tail),
    }
    for metric in SUMMARY_METRICS:
        values = [r[metric] for r in tail if r[metric] is not None]
        if values:
            summary[f"{metric}_mean"] = float(np.mean(values))
            summary[f"{metric}_std"] = float(np.std(values))
        else:
            summary[f"{metric}_mean"] = None
            summary[f"{metric}_std"] = None
    return summary


def run_experiment(spec: ExperimentSpec, out_dir: str | Path):
    """Run every (policy x rate x seed) cell and write episodes.csv,
    summary.csv, and manifest.json under out_dir. On failure the completed
    cells are still flushed and the manifest marks the incomplete ones."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    episode_rows: list[dict] = []
    summary_rows: list[dict] = []
    cells = []
    error: Exception | None = None

    for rate_index, rate in enumerate(spec.job_rates):
        for policy_kind in spec.policies:
            for seed in spec.seeds:
                cell = {"policy": policy_kind, "job_rate": rate, "seed": seed}
                try:
                    rows = _run_cell(spec, policy_kind, rate, rate_index, seed)
                except Exception as exc:  # flush partial results before raising
                    cells.append({**cell, "status": "incomplete"})
                    error = exc
                    break
                episode_rows.extend(rows)
                if rows:
                    summary_rows.append(_summarize(rows, spec.summary_window))
                cells.append({**cell, "status": "complete"})
            if error:
                break
        if error:
            break

    _write_csv(out_dir / "episodes.csv", EPISODE_COLUMNS, episode_rows)
    summary_columns = ["policy", "job_rate", "seed", "episodes", "window"]
    for metric in SUMMARY_METRICS:
        summary_columns += [f"{metric}_mean", f"{metric}_std"]
    _write_csv(out_dir / "summary.csv", summary_columns, summary_rows)
    manifest = {
        "version": __version__,
        "config_hash": config_hash(spec),
        "spec": dataclasses.asdict(spec),
        "cells": cells,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if error is not None:
        raise error
    return episode_rows, summary_rows


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


# -- plot-ready series ----------------------------------------------------------


def emit_plot_series(results_dir: str | Path, out_dir: str | Path,
                     smooth: int = 0) -> list[Path]:
    """One series file per (metric, policy, job rate): episode index vs the
    seed-averaged metric, optionally smoothed with a trailing window."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir)
    with open(results_dir / "episodes.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))

    rates = sorted({r["job_rate"] for r in rows}, key=float)
    policies = sorted({r["policy"] for r in rows})
    written = []
    for rate in rates:
        rate_dir = out_dir / f"rate_{rate}"
        rate_dir.mkdir(parents=True, exist_ok=True)
        for policy in policies:
            subset = [r for r in rows if r["job_rate"] == rate
                      and r["policy"] == policy]
            if not subset:
                continue
            for metric in SUMMARY_METRICS:
                by_episode: dict[int, list[float]] = {}
                for r in subset:
                    if r[metric] == "":
                        continue
                    by_episode.setdefault(int(r["episode"]), []).append(
                        float(r[metric])
                    )
                episodes = sorted(by_episode)
                values = [float(np.mean(by_episode[e])) for e in episodes]
                values = _smooth(values, smooth)
                path = rate_dir / f"series_{metric}__{policy}.csv"
                with open(path, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["episode", "value"])
                    for e, v in zip(episodes, values):
                        writer.writerow([e, f"{v:.10g}"])
                written.append(path)
    return written


def _smooth(values: list[float], window: int) -> list[float]:
    if window <= 1:
        return values
    out = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out.append(float(np.mean(values[lo : i + 1])))
    return out
