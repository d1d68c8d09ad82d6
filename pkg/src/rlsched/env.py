"""Discrete-time cluster simulator.

The cluster is an occupancy image: per resource, a grid of `horizon` rows
(time steps into the future, row 0 = now) by `capacity` unit-cell columns.
Scheduling a job reserves `demand[r]` cells per row over `duration`
consecutive rows starting at the earliest feasible offset; cells need not be
contiguous. Time advances one row at a time, only on void or no-op actions,
so several jobs can be packed within a single step.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from collections import deque

import numpy as np

from .config import EnvConfig
from .errors import ConfigError, InvalidActionError

FREE = -1  # occupancy-grid sentinel; job ids are >= 0


@dataclass
class Job:
    """A work request and its lifecycle timestamps."""

    id: int
    arrival: int
    duration: int
    demand: tuple[int, ...]
    started_at: int | None = None
    finished_at: int | None = None

    def fresh_copy(self) -> "Job":
        return dataclasses.replace(self, started_at=None, finished_at=None)


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


def validate_job(job: Job, config: EnvConfig) -> None:
    if job.id < 0:
        raise ConfigError(f"job id must be >= 0, got {job.id}")
    if job.arrival < 0:
        raise ConfigError(f"job {job.id}: arrival must be >= 0")
    if job.duration < 1:
        raise ConfigError(f"job {job.id}: duration must be >= 1")
    if job.duration > config.horizon:
        raise ConfigError(
            f"job {job.id}: duration {job.duration} exceeds horizon {config.horizon}"
        )
    if len(job.demand) != config.num_resources:
        raise ConfigError(
            f"job {job.id}: demand has {len(job.demand)} components, "
            f"expected {config.num_resources}"
        )
    if any(d < 0 for d in job.demand):
        raise ConfigError(f"job {job.id}: negative demand {job.demand}")
    if not any(d > 0 for d in job.demand):
        raise ConfigError(f"job {job.id}: demand must be positive somewhere")
    for r, (d, cap) in enumerate(zip(job.demand, config.capacities)):
        if d > cap:
            raise ConfigError(
                f"job {job.id}: demand {d} exceeds capacity {cap} "
                f"for resource {config.resources[r]}"
            )


class ClusterImage:
    """Per-resource occupancy grids over the look-ahead horizon."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.grids = [
            np.full((config.horizon, cap), FREE, dtype=np.int64)
            for cap in config.capacities
        ]

    def free_counts(self) -> np.ndarray:
        """(horizon, num_resources) array of free cells per row."""
        return np.stack([(g == FREE).sum(axis=1) for g in self.grids], axis=1)

    def fits_at(self, job: Job, offset: int) -> bool:
        if offset < 0 or offset + job.duration > self.config.horizon:
            return False
        free = self.free_counts()
        rows = slice(offset, offset + job.duration)
        return all(
            free[rows, r].min() >= d for r, d in enumerate(job.demand) if d > 0
        )

    def earliest_offset(self, job: Job) -> int | None:
        free = self.free_counts()
        for offset in range(self.config.horizon - job.duration + 1):
            rows = slice(offset, offset + job.duration)
            if all(free[rows, r].min() >= d for r, d in enumerate(job.demand) if d > 0):
                return offset
        return None

    def place(self, job: Job, offset: int) -> None:
        # lowest-index free cells per row keep placement deterministic
        for r, d in enumerate(job.demand):
            if d == 0:
                continue
            grid = self.grids[r]
            for row in range(offset, offset + job.duration):
                cols = np.flatnonzero(grid[row] == FREE)[:d]
                assert len(cols) == d, "placement on insufficient free cells"
                grid[row, cols] = job.id

    def shift_up(self) -> None:
        for grid in self.grids:
            grid[:-1] = grid[1:]
            grid[-1] = FREE


class ClusterEnv:
    """Single-cluster scheduling environment.

    Reachable job states: not-yet-arrived (including arrivals deferred while
    the backlog is full), queue slot, backlog, running (allocated, possibly
    at a future start row), completed. Exactly one holds at any time.
    """

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self.jobs: list[Job] = []
        self.reset([])

    # -- episode lifecycle ---------------------------------------------------

    def reset(self, jobs, seed: int = 0) -> "ClusterEnv":
        """Start an episode over `jobs` (sorted by arrival; copied, so the
        caller's list is never mutated). Deterministic in (config, jobs, seed)."""
        config = self.config
        incoming = [j.fresh_copy() for j in jobs]
        for job in incoming:
            validate_job(job, config)
        incoming.sort(key=lambda j: j.arrival)  # stable: ties keep input order
        if len({j.id for j in incoming}) != len(incoming):
            raise ConfigError("duplicate job ids in sequence")

        self.rng = np.random.default_rng(seed)
        self.jobs = incoming
        self.clock = 0
        self.image = ClusterImage(config)
        self.queue: list[Job | None] = [None] * config.queue_slots
        self.backlog: deque[Job] = deque()
        self.pending: deque[Job] = deque()  # arrived but backlog was full
        self.running: list[Job] = []
        self.completed: list[Job] = []
        self._finish_row: dict[int, int] = {}  # job id -> absolute finish step
        self._next_arrival = 0
        self._admit_arrivals()
        self._rebalance()
        return self

    # -- admission / queue bookkeeping ----------------------------------------

    def _admit_arrivals(self) -> None:
        while (
            self._next_arrival < len(self.jobs)
            and self.jobs[self._next_arrival].arrival <= self.clock
        ):
            self.pending.append(self.jobs[self._next_arrival])
            self._next_arrival += 1

    def _free_slot(self) -> int | None:
        for i, job in enumerate(self.queue):
            if job is None:
                return i
        return None

    def _rebalance(self) -> None:
        """Backlog heads fill free slots first (FIFO), then deferred arrivals
        flow into whatever space remains (slots, then backlog)."""
        while True:
            slot = self._free_slot()
            if self.backlog and slot is not None:
                self.queue[slot] = self.backlog.popleft()
            elif self.pending and slot is not None and not self.backlog:
                self.queue[slot] = self.pending.popleft()
            elif self.pending and len(self.backlog) < self.config.backlog_size:
                self.backlog.append(self.pending.popleft())
            else:
                return

    # -- scheduling -----------------------------------------------------------

    def try_allocate(self, job: Job) -> int | None:
        """Earliest feasible start offset within the horizon, or None."""
        return self.image.earliest_offset(job)

    def _allocate(self, slot_index: int, offset: int) -> Job:
        job = self.queue[slot_index]
        self.image.place(job, offset)
        job.started_at = self.clock + offset
        self._finish_row[job.id] = job.started_at + job.duration
        self.queue[slot_index] = None
        self.running.append(job)
        self._rebalance()
        return job

    def advance_time(self) -> tuple[float, list[Job]]:
        """One simulated step: reward for the elapsed step (computed before
        any mutation), then image shift, completions, arrivals, promotion."""
        reward = self._step_reward()
        self.clock += 1
        self.image.shift_up()

        completions = [
            job for job in self.running if self._finish_row[job.id] == self.clock
        ]
        for job in completions:
            job.finished_at = self.clock
            self.running.remove(job)
            del self._finish_row[job.id]
            self.completed.append(job)

        self._admit_arrivals()
        self._rebalance()
        return reward, completions

    def _step_reward(self) -> float:
        in_system = (
            self.running
            + [j for j in self.queue if j is not None]
            + list(self.backlog)
        )
        return -sum(1.0 / j.duration for j in in_system)

    def step(self, action: int) -> StepOutcome:
        """Apply one action. Valid allocations do not advance time; the void
        action, an empty slot, or an unfittable job advance time by one step."""
        n = self.config.queue_slots
        if not isinstance(action, (int, np.integer)) or action < 0 or action > n:
            raise InvalidActionError(f"action must be in [0, {n}], got {action!r}")
        if self.is_done():
            raise RuntimeError("step() called on a finished episode")

        reward = 0.0
        completions: list[Job] = []
        invalid = False
        if action == 0:
            reward, completions = self.advance_time()
        else:
            job = self.queue[action - 1]
            offset = self.try_allocate(job) if job is not None else None
            if job is not None and offset is not None:
                self._allocate(action - 1, offset)
            else:
                invalid = True
                reward, completions = self.advance_time()

        return StepOutcome(
            observation=self.encode_state(),
            reward=reward,
            done=self.is_done(),
            info={"jobs_completed": len(completions), "invalid_action": invalid},
        )

    def is_done(self) -> bool:
        return len(self.completed) == len(self.jobs) or (
            self.clock >= self.config.episode_limit
        )

    # -- observation ----------------------------------------------------------

    def backlog_block_width(self) -> int:
        h = self.config.horizon
        return math.ceil(self.config.backlog_size / h)

    def observation_shape(self) -> tuple[int, int]:
        cfg = self.config
        width = sum(cap * (1 + cfg.queue_slots) for cap in cfg.capacities)
        return cfg.horizon, width + self.backlog_block_width()

    def encode_state(self) -> np.ndarray:
        """Fixed-shape 2-D image: per resource, the cluster occupancy block
        followed by one block per queue slot (job footprint drawn top-left),
        then a unary column-major backlog counter."""
        cfg = self.config
        h = cfg.horizon
        blocks = []
        for r, cap in enumerate(cfg.capacities):
            blocks.append((self.image.grids[r] != FREE).astype(np.float32))
            for job in self.queue:
                block = np.zeros((h, cap), dtype=np.float32)
                if job is not None:
                    block[: job.duration, : job.demand[r]] = 1.0
                blocks.append(block)
        width = self.backlog_block_width()
        backlog_block = np.zeros((h, width), dtype=np.float32)
        count = len(self.backlog)
        full, rem = divmod(count, h)
        backlog_block[:, :full] = 1.0
        if rem and full < width:
            backlog_block[:rem, full] = 1.0
        blocks.append(backlog_block)
        return np.hstack(blocks)

    # -- introspection helpers (used by baselines, metrics, and tests) --------

    def queued_jobs(self) -> list[tuple[int, Job]]:
        """(slot_index, job) pairs for occupied slots; slot_index is 0-based."""
        return [(i, j) for i, j in enumerate(self.queue) if j is not None]

    def jobs_in_system(self) -> int:
        return (
            len(self.running)
            + sum(j is not None for j in self.queue)
            + len(self.backlog)
        )

    def free_row0(self) -> np.ndarray:
        return self.image.free_counts()[0].astype(np.float64)


def reset(config: EnvConfig, jobs, seed: int = 0) -> ClusterEnv:
    """Build and initialize an environment in one call."""
    return ClusterEnv(config).reset(jobs, seed)
