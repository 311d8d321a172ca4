"""Benchmark runner: generation, sandboxed scoring, persistence, resume.

Results are persisted to an append-only line-delimited JSON run log with one
record per (task, completion) plus a task summary record that doubles as the
completion marker for resumption.  Seeds are derived per (cell, task) from
the base seed by stable hashing, so a resumed run draws exactly the
completions the uninterrupted run would have drawn.  Tasks execute in a
bounded worker pool; the log is appended only by the coordinating thread.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..backend import GenerationBackend, GenerationRequest, extract_code
from ..decode import DecodingParams
from .report import SKIP_MISSING_DEP, EvalReport, TaskResult, aggregate, emit_report
from .sandbox import SandboxConfig, run_task
from .tasks import BenchmarkTask, missing_requirements, task_set_hash

RUN_LOG_NAME = "results.jsonl"
GRID_STATE_NAME = "grid_state.json"

PAPER_GRID = ((0.0, 0.5, 1.0), (0.0, 0.5, 1.0))


def derive_task_seed(base_seed: int, temperature: float, top_p: float, task_id: str) -> int:
    """Stable 63-bit seed per (decoding cell, task)."""
    key = f"{base_seed}|{temperature}|{top_p}|{task_id}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


@dataclass
class EvalSettings:
    n: int = 5
    params: DecodingParams = field(default_factory=DecodingParams)
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    workers: int = 1
    success_k: int | None = None
    pass_at_ks: tuple[int, ...] = (1, 3, 5)
    base_seed: int = 0

    def cell_params(self, temperature: float, top_p: float) -> DecodingParams:
        return DecodingParams(
            temperature=temperature,
            top_p=top_p,
            max_new_tokens=self.params.max_new_tokens,
            seed=self.params.seed,
        )


def _score_task(
    task: BenchmarkTask,
    backend: GenerationBackend,
    settings: EvalSettings,
    params: DecodingParams,
) -> tuple[TaskResult, list[dict]]:
    """Generate n completions for one task and run each in the sandbox."""
    missing = missing_requirements(task)
    if missing:
        result = TaskResult(
            task_id=task.id,
            category=task.category,
            n=0,
            c=0,
            per_completion=[],
            decoding=params,
            skipped=SKIP_MISSING_DEP,
        )
        return result, []
    seed = derive_task_seed(settings.base_seed, params.temperature, params.top_p, task.id)
    request = GenerationRequest(
        prompt=task.prompt,
        params=DecodingParams(
            temperature=params.temperature,
            top_p=params.top_p,
            max_new_tokens=params.max_new_tokens,
            seed=seed,
        ),
        n=settings.n,
    )
    generation = backend.generate(request)
    outcomes = []
    completion_records = []
    for index, completion in enumerate(generation.completions):
        outcome = run_task(task, extract_code(completion), settings.sandbox)
        outcomes.append(outcome)
        completion_records.append(
            {
                "type": "completion",
                "task_id": task.id,
                "index": index,
                "seed": seed + index,
                "backend_id": generation.backend_id,
                "sampled_by": generation.sampled_by,
                "backend_error": generation.errors[index],
                **outcome.to_record(),
            }
        )
    result = TaskResult.from_outcomes(task.id, task.category, outcomes, request.params)
    if settings.n > 1 and len(set(generation.completions)) == 1:
        # greedy decoding (or a degenerate cell) makes all n draws identical
        completion_records.append(
            {"type": "note", "task_id": task.id, "identical_completions": True}
        )
    return result, completion_records


def _load_completed(log_path: Path) -> dict[str, TaskResult]:
    """Task summary records already persisted in a (possibly partial) log."""
    completed: dict[str, TaskResult] = {}
    if not log_path.exists():
        return completed
    for line in log_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("type") == "task":
            result = TaskResult.from_record(record["result"])
            completed[result.task_id] = result
    return completed


def run_eval(
    tasks: Sequence[BenchmarkTask],
    backend: GenerationBackend,
    out_dir: str | Path,
    settings: EvalSettings | None = None,
    params: DecodingParams | None = None,
    after_task: Callable[[TaskResult], None] | None = None,
) -> EvalReport:
    """Evaluate every task once, persisting incrementally; resumable.

    Tasks already present in the run log are not re-run.  ``after_task``
    fires after each newly scored task is persisted (used for progress and
    for interruption tests).  Backend failures propagate as infrastructure
    errors; everything persisted so far stays on disk for resumption.
    """
    settings = settings or EvalSettings()
    params = params or settings.params
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / RUN_LOG_NAME

    completed = _load_completed(log_path)
    pending = [t for t in tasks if t.id not in completed]
    fresh_log = not log_path.exists() or log_path.stat().st_size == 0

    with log_path.open("a", encoding="utf-8") as log:
        if fresh_log:
            header = {
                "type": "header",
                "backend_id": backend.backend_id,
                "n": settings.n,
                "decoding": {"temperature": params.temperature, "top_p": params.top_p},
                "base_seed": settings.base_seed,
                "task_set_hash": task_set_hash(list(tasks)),
            }
            log.write(json.dumps(header, sort_keys=True) + "\n")
            log.flush()

        def persist(result: TaskResult, records: list[dict]) -> None:
            for record in records:
                log.write(json.dumps(record, sort_keys=True) + "\n")
            log.write(json.dumps({"type": "task", "result": result.to_record()}, sort_keys=True) + "\n")
            log.flush()
            completed[result.task_id] = result

        if settings.workers <= 1:
            for task in pending:
                result, records = _score_task(task, backend, settings, params)
                persist(result, records)
                if after_task is not None:
                    after_task(result)
        else:
            with ThreadPoolExecutor(max_workers=settings.workers) as pool:
                futures = {
                    pool.submit(_score_task, task, backend, settings, params): task
                    for task in pending
                }
                remaining = set(futures)
                while remaining:
                    done, remaining = wait(remaining, return_when=FIRST_COMPLETED)
                    for future in done:
                        result, records = future.result()
                        persist(result, records)
                        if after_task is not None:
                            after_task(result)

    ordered = [completed[t.id] for t in tasks if t.id in completed]
    return aggregate(ordered, success_k=settings.success_k, pass_at_ks=settings.pass_at_ks)


def grid_run(
    tasks: Sequence[BenchmarkTask],
    backend: GenerationBackend,
    out_dir: str | Path,
    grid: tuple[Sequence[float], Sequence[float]] = PAPER_GRID,
    settings: EvalSettings | None = None,
    after_task: Callable[[TaskResult], None] | None = None,
) -> dict[tuple[float, float], EvalReport]:
    """Run the full decoding grid, one resumable cell at a time.

    Each cell's results are fully persisted before the next cell starts; a
    grid state file marks completed cells so an interrupted run resumes at
    the first unfinished cell (and, inside it, at the first unfinished task).
    """
    temperatures, top_ps = grid
    if not temperatures or not top_ps:
        raise ValueError("grid must have at least one temperature and one top_p value")
    settings = settings or EvalSettings()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state_path = out_dir / GRID_STATE_NAME
    state = {"completed_cells": []}
    if state_path.exists():
        state = json.loads(state_path.read_text(encoding="utf-8"))

    reports: dict[tuple[float, float], EvalReport] = {}
    for temperature in temperatures:
        for top_p in top_ps:
            cell_key = f"T={temperature},top_p={top_p}"
            cell_dir = out_dir / "cells" / f"T{temperature}_p{top_p}"
            cell_params = settings.cell_params(temperature, top_p)
            report = run_eval(
                tasks,
                backend,
                cell_dir,
                settings=settings,
                params=cell_params,
                after_task=after_task,
            )
            reports[(temperature, top_p)] = report
            if cell_key not in state["completed_cells"]:
                state["completed_cells"].append(cell_key)
                state_path.write_text(json.dumps(state, indent=2) + "\n", encoding="utf-8")
            (cell_dir / "report.json").write_text(emit_report(report, "json"), encoding="utf-8")
    return reports


def combine_grid_reports(reports: dict[tuple[float, float], EvalReport]) -> EvalReport:
    """One report whose per-cell tallies mirror the grid."""
    from .report import Tally

    per_cell = {cell: report.overall for cell, report in reports.items()}
    first = reports[sorted(reports)[0]]
    return EvalReport(
        overall=Tally(),
        per_category={},
        pass_at={},
        per_cell=per_cell,
        success_rule=first.success_rule,
        skipped=first.skipped,
    )
