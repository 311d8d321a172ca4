"""Benchmark engine: task schema, sandboxed execution, pass@k, reports."""

from .tasks import CATEGORIES, BenchmarkTask, load_tasks, task_set_hash
from .sandbox import CompletionOutcome, SandboxConfig, run_task
from .metrics import pass_at_k
from .report import EvalReport, TaskResult, aggregate, emit_report
from .runner import grid_run, run_eval

__all__ = [
    "CATEGORIES",
    "BenchmarkTask",
    "load_tasks",
    "task_set_hash",
    "SandboxConfig",
    "CompletionOutcome",
    "run_task",
    "pass_at_k",
    "TaskResult",
    "EvalReport",
    "aggregate",
    "emit_report",
    "run_eval",
    "grid_run",
]
