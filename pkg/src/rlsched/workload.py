"""Synthetic workload generation and job-trace ingestion.

Synthetic jobs arrive as a Bernoulli process: at each step, one job appears
with probability `rate`. Job sizes follow a bimodal short/long mix with one
randomly chosen dominant resource, which is the standard way to provoke
queueing contention at desk scale.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EnvConfig
from .env import Job
from .errors import ParseError, SpecError, ValidationError


@dataclass(frozen=True)
class WorkloadSpec:
    rate: float = 0.7
    length: int = 60
    small_job_fraction: float = 0.8
    small_duration_range: tuple[int, int] = (1, 3)
    large_duration_range: tuple[int, int] = (10, 15)
    dominant_demand_range: tuple[int, int] = (3, 5)
    other_demand_range: tuple[int, int] = (1, 2)
    num_resources: int = 2
    seed: int = 0


def _check_range(name: str, rng: tuple[int, int], low: int) -> None:
    lo, hi = rng
    if lo > hi:
        raise SpecError(f"{name} is empty: {rng}")
    if lo < low:
        raise SpecError(f"{name} must start at >= {low}, got {rng}")


def validate_spec(spec: WorkloadSpec, config: EnvConfig | None = None) -> None:
    if not 0.0 <= spec.rate <= 1.0:
        raise SpecError(f"rate must be in [0, 1], got {spec.rate}")
    if spec.length < 0:
        raise SpecError(f"length must be >= 0, got {spec.length}")
    if not 0.0 <= spec.small_job_fraction <= 1.0:
        raise SpecError(f"small_job_fraction must be in [0, 1]")
    _check_range("small_duration_range", spec.small_duration_range, 1)
    _check_range("large_duration_range", spec.large_duration_range, 1)
    _check_range("dominant_demand_range", spec.dominant_demand_range, 1)
    _check_range("other_demand_range", spec.other_demand_range, 0)
    if spec.num_resources < 1:
        raise SpecError("num_resources must be >= 1")
    if config is not None:
        max_dur = max(spec.small_duration_range[1], spec.large_duration_range[1])
        if max_dur > config.horizon:
            raise SpecError(
                f"max duration {max_dur} exceeds horizon {config.horizon}"
            )
        if spec.num_resources != config.num_resources:
            raise SpecError(
                f"spec has {spec.num_resources} resources, config "
                f"{config.num_resources}"
            )
        max_dem = max(spec.dominant_demand_range[1], spec.other_demand_range[1])
        if max_dem > min(config.capacities):
            raise SpecError(
                f"max demand {max_dem} exceeds capacity {min(config.capacities)}"
            )


def generate(spec: WorkloadSpec, config: EnvConfig | None = None) -> list[Job]:
    """Sample a job sequence. Pure in `spec`: the same spec always yields the
    identical sequence. When `config` is given the spec is also checked
    against the cluster dimensions."""
    validate_spec(spec, config)
    rng = np.random.default_rng(spec.seed)
    jobs = []
    for t in range(spec.length):
        if rng.random() >= spec.rate:
            continue
        if rng.random() < spec.small_job_fraction:
            lo, hi = spec.small_duration_range
        else:
            lo, hi = spec.large_duration_range
        duration = int(rng.integers(lo, hi + 1))
        dominant = int(rng.integers(spec.num_resources))
        demand = []
        for r in range(spec.num_resources):
            lo, hi = (
                spec.dominant_demand_range
                if r == dominant
                else spec.other_demand_range
            )
            demand.append(int(rng.integers(lo, hi + 1)))
        jobs.append(
            Job(id=len(jobs), arrival=t, duration=duration, demand=tuple(demand))
        )
    return jobs


# -- trace files ---------------------------------------------------------------

CANONICAL_COLUMNS = ("job_id", "arrival_time", "duration", "cpu_req", "mem_req")


@dataclass(frozen=True)
class TraceMapping:
    """Names the source columns of a trace file; defaults match the canonical
    layout. `demand_columns` follows the config's resource order."""

    job_id: str = "job_id"
    arrival: str = "arrival_time"
    duration: str = "duration"
    demand_columns: tuple[str, ...] = ("cpu_req", "mem_req")


def load_trace(
    path: str | Path,
    config: EnvConfig,
    mapping: TraceMapping | None = None,
    time_scale: float = 1.0,
) -> list[Job]:
    """Ingest a comma-separated job trace.

    Times are divided by `time_scale` and quantized: arrivals floor, durations
    ceiling (a job never rounds down to zero steps). Arrivals are rebased so
    the earliest is step 0 and the result is sorted by arrival.
    """
    mapping = mapping or TraceMapping()
    if time_scale <= 0:
        raise ValueError(f"time_scale must be positive, got {time_scale}")
    if len(mapping.demand_columns) != config.num_resources:
        raise ParseError(
            f"mapping names {len(mapping.demand_columns)} demand columns, "
            f"config has {config.num_resources} resources"
        )

    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("empty file, expected a header row", line=1)
        needed = (mapping.job_id, mapping.arrival, mapping.duration) + tuple(
            mapping.demand_columns
        )
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"missing columns {missing}", line=1)
        for record in reader:
            line = reader.line_num
            try:
                job_id = int(record[mapping.job_id])
                arrival_raw = float(record[mapping.arrival])
                duration_raw = float(record[mapping.duration])
                demand = tuple(int(record[c]) for c in mapping.demand_columns)
            except (TypeError, ValueError) as exc:
                raise ParseError(str(exc), line=line) from exc
            rows.append((job_id, arrival_raw, duration_raw, demand))

    seen = set()
    jobs = []
    for job_id, arrival_raw, duration_raw, demand in rows:
        if job_id in seen:
            raise ValidationError("duplicate job id", job_id=job_id)
        seen.add(job_id)
        if arrival_raw < 0:
            raise ValidationError("negative arrival time", job_id=job_id)
        if duration_raw <= 0:
            raise ValidationError("duration must be positive", job_id=job_id)
        for d, cap, name in zip(demand, config.capacities, config.resources):
            if d < 0:
                raise ValidationError(f"negative {name} demand", job_id=job_id)
            if d > cap:
                raise ValidationError(
                    f"{name} demand {d} exceeds capacity {cap}", job_id=job_id
                )
        if not any(demand):
            raise ValidationError("demand must be positive somewhere", job_id=job_id)
        arrival = math.floor(arrival_raw / time_scale)
        duration = math.ceil(duration_raw / time_scale)
        jobs.append(Job(id=job_id, arrival=arrival, duration=duration, demand=demand))

    if jobs:
        base = min(j.arrival for j in jobs)
        for j in jobs:
            j.arrival -= base
    jobs.sort(key=lambda j: j.arrival)
    return jobs


def save_trace(jobs, path: str | Path) -> None:
    """Write jobs in the canonical trace layout (step units, two resources)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANONICAL_COLUMNS)
        for job in jobs:
            writer.writerow([job.id, job.arrival, job.duration, *job.demand])
