"""Aggregation of task results into reports, and report emission.

A task counts as Success under the configured rule (default: at least one of
its n completions passes); accuracy is success / (success + failed) reported
in percent to two decimals.  Skipped tasks are excluded from every
denominator and counted separately.  Reports carry only counts and derived
numbers, never wall-clock data, so identical results always emit identical
documents.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from ..decode import DecodingParams
from ..errors import AggregationError
from .metrics import pass_at_k
from .sandbox import CompletionOutcome, STATUS_PASS
from .tasks import CATEGORIES

REPORT_SCHEMA_VERSION = "eval-report/v1"

SKIP_MISSING_DEP = "skipped-missing-dep"


@dataclass
class TaskResult:
    """Outcome of one task: n completions, c of them passing."""

    task_id: str
    category: str
    n: int
    c: int
    per_completion: list[CompletionOutcome]
    decoding: DecodingParams
    skipped: str | None = None  # e.g. "skipped-missing-dep"; excluded from accuracy

    @classmethod
    def from_outcomes(
        cls,
        task_id: str,
        category: str,
        outcomes: list[CompletionOutcome],
        decoding: DecodingParams,
    ) -> "TaskResult":
        return cls(
            task_id=task_id,
            category=category,
            n=len(outcomes),
            c=sum(1 for o in outcomes if o.status == STATUS_PASS),
            per_completion=outcomes,
            decoding=decoding,
        )

    def to_record(self) -> dict:
        return {
            "task_id": self.task_id,
            "category": self.category,
            "n": self.n,
            "c": self.c,
            "per_completion": [o.to_record() for o in self.per_completion],
            "decoding": {
                "temperature": self.decoding.temperature,
                "top_p": self.decoding.top_p,
                "max_new_tokens": self.decoding.max_new_tokens,
                "seed": self.decoding.seed,
            },
            "skipped": self.skipped,
        }

    @classmethod
    def from_record(cls, record: dict) -> "TaskResult":
        return cls(
            task_id=record["task_id"],
            category=record["category"],
            n=record["n"],
            c=record["c"],
            per_completion=[
                CompletionOutcome(
                    status=o["status"],
                    duration=o["duration"],
                    stderr_excerpt=o.get("stderr_excerpt", ""),
                )
                for o in record["per_completion"]
            ],
            decoding=DecodingParams(**record["decoding"]),
            skipped=record.get("skipped"),
        )


@dataclass
class Tally:
    success: int = 0
    failed: int = 0

    @property
    def total(self) -> int:
        return self.success + self.failed

    @property
    def accuracy(self) -> float:
        """Percent, exact; format with two decimals at emit time."""
        if self.total == 0:
            return 0.0
        return 100.0 * self.success / self.total

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "failed": self.failed,
            "accuracy": round(self.accuracy, 2),
        }


@dataclass
class EvalReport:
    overall: Tally
    per_category: dict[str, Tally]
    pass_at: dict[int, float] = field(default_factory=dict)
    per_cell: dict[tuple[float, float], Tally] = field(default_factory=dict)
    success_rule: str = "any-of-n"
    skipped: int = 0

    def to_dict(self) -> dict:
        doc = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "success_rule": self.success_rule,
            "overall": self.overall.to_dict(),
            "per_category": {
                name: tally.to_dict() for name, tally in sorted(self.per_category.items())
            },
            "pass_at": {str(k): round(v, 6) for k, v in sorted(self.pass_at.items())},
            "skipped": self.skipped,
        }
        if self.per_cell:
            doc["per_cell"] = {
                f"T={t},top_p={p}": tally.to_dict()
                for (t, p), tally in sorted(self.per_cell.items())
            }
        return doc


def _is_success(result: TaskResult, success_k: int | None) -> bool:
    if success_k is None:
        return result.c >= 1
    # deterministic best-of-k: a pass among the first k completions
    return any(o.status == STATUS_PASS for o in result.per_completion[:success_k])


def aggregate(
    results: list[TaskResult],
    success_k: int | None = None,
    pass_at_ks: tuple[int, ...] = (),
) -> EvalReport:
    """Fold task results into success/failed tallies and pass@k means.

    ``success_k=None`` is the default rule (any of the n completions passes);
    an integer restricts the rule to the first k completions.  Duplicate task
    ids are an error.  Pass@k is averaged over tasks with n >= k.
    """
    seen: set[str] = set()
    overall = Tally()
    per_category: dict[str, Tally] = {}
    skipped = 0
    scored: list[TaskResult] = []
    for result in results:
        if result.task_id in seen:
            raise AggregationError(f"duplicate task id {result.task_id!r} in results")
        seen.add(result.task_id)
        if result.skipped:
            skipped += 1
            continue
        scored.append(result)
        tally = per_category.setdefault(result.category, Tally())
        if _is_success(result, success_k):
            overall.success += 1
            tally.success += 1
        else:
            overall.failed += 1
            tally.failed += 1
    pass_at: dict[int, float] = {}
    for k in pass_at_ks:
        eligible = [r for r in scored if r.n >= k]
        if eligible:
            pass_at[k] = sum(pass_at_k(r.n, r.c, k) for r in eligible) / len(eligible)
    rule = "any-of-n" if success_k is None else f"any-of-first-{success_k}"
    return EvalReport(
        overall=overall,
        per_category=per_category,
        pass_at=pass_at,
        success_rule=rule,
        skipped=skipped,
    )


def _fmt_pct(value: float) -> str:
    return f"{value:.2f}"


def _text_table(report: EvalReport) -> str:
    lines = [f"Success rule: {report.success_rule}"]
    if report.skipped:
        lines.append(f"Skipped tasks (missing deps): {report.skipped}")
    lines.append("")
    if report.per_cell:
        cells = sorted(report.per_cell.items())
        header = ["Metric"] + [f"T={t}/p={p}" for (t, p), _ in cells]
        rows = [
            ["Success"] + [str(tally.success) for _, tally in cells],
            ["Failed"] + [str(tally.failed) for _, tally in cells],
            ["Accuracy (%)"] + [_fmt_pct(tally.accuracy) for _, tally in cells],
        ]
        lines.extend(_align([header] + rows))
        lines.append("")
    if report.per_category:
        header = ["Category", "Success", "Failed", "Accuracy (%)"]
        rows = []
        ordered = [c for c in CATEGORIES if c in report.per_category]
        ordered += [c for c in sorted(report.per_category) if c not in CATEGORIES]
        for name in ordered:
            tally = report.per_category[name]
            rows.append([name, str(tally.success), str(tally.failed), _fmt_pct(tally.accuracy)])
        lines.extend(_align([header] + rows))
        lines.append("")
    overall = report.overall
    if overall.total > 0 or not report.per_cell:
        lines.extend(
            _align(
                [
                    ["Metric", "Value"],
                    ["Success", str(overall.success)],
                    ["Failed", str(overall.failed)],
                    ["Accuracy (%)", _fmt_pct(overall.accuracy)],
                ]
            )
        )
    for k, value in sorted(report.pass_at.items()):
        lines.append(f"pass@{k}: {value:.4f}")
    return "\n".join(lines) + "\n"


def _align(rows: list[list[str]]) -> list[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    out = []
    for row in rows:
        out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return out


def _csv_table(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scope", "label", "success", "failed", "accuracy_pct"])
    writer.writerow(
        ["overall", "overall", report.overall.success, report.overall.failed, _fmt_pct(report.overall.accuracy)]
    )
    for name in sorted(report.per_category):
        tally = report.per_category[name]
        writer.writerow(["category", name, tally.success, tally.failed, _fmt_pct(tally.accuracy)])
    for (t, p), tally in sorted(report.per_cell.items()):
        writer.writerow(
            ["cell", f"T={t},top_p={p}", tally.success, tally.failed, _fmt_pct(tally.accuracy)]
        )
    for k, value in sorted(report.pass_at.items()):
        writer.writerow(["pass_at", f"k={k}", "", "", f"{value:.4f}"])
    return buf.getvalue()


def emit_report(report: EvalReport, format: str = "text-table") -> str:
    """Render a report document; formats: text-table, json, csv."""
    if format == "text-table":
        return _text_table(report)
    if format == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if format == "csv":
        return _csv_table(report)
    raise ValueError(f"unknown report format {format!r}")
