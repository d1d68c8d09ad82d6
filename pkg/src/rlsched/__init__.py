"""Cluster-scheduling simulator, actor-critic scheduler, baselines, and
metrics harness."""

__version__ = "0.1.0"

from .config import EnvConfig, load_env_config
from .env import ClusterEnv, Job, StepOutcome, reset
from .workload import WorkloadSpec, TraceMapping, generate, load_trace, save_trace
from .metrics import EpisodeReport, episode_report, slowdown, waiting_time
from .agent import (
    ActorCriticAgent,
    AgentConfig,
    Transition,
    n_step_returns,
    td_error,
    train,
)
from .baselines import make_policy, random_select, run_greedy, sjf_select, tetris_select
from .experiment import ExperimentSpec, emit_plot_series, run_experiment

__all__ = [
    "__version__",
    "EnvConfig",
    "load_env_config",
    "ClusterEnv",
    "Job",
    "StepOutcome",
    "reset",
    "WorkloadSpec",
    "TraceMapping",
    "generate",
    "load_trace",
    "save_trace",
    "EpisodeReport",
    "episode_report",
    "slowdown",
    "waiting_time",
    "ActorCriticAgent",
    "AgentConfig",
    "Transition",
    "n_step_returns",
    "td_error",
    "train",
    "make_policy",
    "random_select",
    "run_greedy",
    "sjf_select",
    "tetris_select",
    "ExperimentSpec",
    "emit_plot_series",
    "run_experiment",
]
