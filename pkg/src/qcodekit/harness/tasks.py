"""Benchmark task schema and loading.

Tasks live in line-delimited JSON files with fields
``{id, category, prompt, entry_point, test_code, timeout, requires}``.
The category taxonomy is the fixed six-way split used throughout reporting.
"""

from __future__ import annotations

import hashlib
import importlib.util
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..errors import CorpusError

CATEGORIES = (
    "basic_circuits",
    "qml",
    "protocols",
    "chem_sim",
    "algorithms",
    "compilation_noise",
)

DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True)
class BenchmarkTask:
    id: str
    category: str
    prompt: str
    entry_point: str
    test_code: str
    timeout: float = DEFAULT_TIMEOUT
    requires: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"task {self.id!r}: unknown category {self.category!r}")
        if self.timeout <= 0:
            raise ValueError(f"task {self.id!r}: timeout must be > 0")
        if self.entry_point and self.entry_point not in self.test_code:
            raise ValueError(
                f"task {self.id!r}: test_code never references entry point {self.entry_point!r}"
            )

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "prompt": self.prompt,
            "entry_point": self.entry_point,
            "test_code": self.test_code,
            "timeout": self.timeout,
            "requires": list(self.requires),
        }


def load_tasks(path: str | Path) -> list[BenchmarkTask]:
    """Load a line-delimited JSON task file; raises on any malformed record."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read task file {path}: {exc}") from exc
    tasks: list[BenchmarkTask] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
        try:
            task = BenchmarkTask(
                id=str(record["id"]),
                category=record["category"],
                prompt=record["prompt"],
                entry_point=record.get("entry_point", ""),
                test_code=record["test_code"],
                timeout=float(record.get("timeout", DEFAULT_TIMEOUT)),
                requires=tuple(record.get("requires", ())),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad task record: {exc}") from exc
        if task.id in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate task id {task.id!r}")
        seen.add(task.id)
        tasks.append(task)
    return tasks


def task_set_hash(tasks: Sequence[BenchmarkTask]) -> str:
    """Content hash of the task set, recorded in run manifests."""
    digest = hashlib.sha256()
    for task in sorted(tasks, key=lambda t: t.id):
        digest.update(json.dumps(task.to_record(), sort_keys=True).encode("utf-8"))
    return digest.hexdigest()


def missing_requirements(task: BenchmarkTask) -> list[str]:
    """Names from ``requires`` that cannot be imported in this interpreter."""
    missing = []
    for name in task.requires:
        if importlib.util.find_spec(name) is None:
            missing.append(name)
    return missing


def stub_task_pack() -> Path:
    """Path of the bundled stub task pack (schema demo, hermetic eval)."""
    return Path(__file__).resolve().parent.parent / "assets" / "stub_tasks.jsonl"


def stub_solutions() -> dict[str, str]:
    """Canonical completions for the stub pack, keyed by task id."""
    path = Path(__file__).resolve().parent.parent / "assets" / "stub_solutions.json"
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class TaskSkip:
    """Marker for a task excluded from a run, with the reason."""

    task_id: str
    reason: str
    missing: tuple[str, ...] = field(default_factory=tuple)
