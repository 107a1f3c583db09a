"""Experiment harness: configuration, dataset/run orchestration, CLI, reports."""

from .config import ExperimentConfig, SchemaError, SplitSpec  # noqa: F401
from .runner import run_ablation, RunPaths  # noqa: F401
