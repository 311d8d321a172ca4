"""Instruction-code corpus loading, validation, stats, and augmentation.

A corpus is a collection of instruction->code training pairs.  The on-disk
format is line-delimited JSON (one record per line) with fields
``{id, instruction, code, source, category}``; a JSON array of the same
records is accepted as an alternate format.  Records that fail validation are
collected with their record index and reason, never silently dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

from .errors import AugmentationError, BackendError, CorpusError
from .tokenizer import Tokenizer, WhitespaceTokenizer

if TYPE_CHECKING:  # pragma: no cover
    from .backend import GenerationBackend

VALID_SOURCES = ("github", "book", "docs", "other")
UNCATEGORIZED = "uncategorized"

# Training inputs longer than this are flagged oversized: excluded from
# training batches but kept for retrieval.
DEFAULT_MAX_INPUT_TOKENS = 15_000


@dataclass(frozen=True)
class InstructionSample:
    """One instruction->code pair with source/category metadata."""

    id: str
    instruction: str
    code: str
    source: str = "other"
    category: str = UNCATEGORIZED
    token_count: int = 0

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "code": self.code,
            "source": self.source,
            "category": self.category,
        }


@dataclass(frozen=True)
class ValidationIssue:
    """A record that failed validation: where it was and why."""

    index: int
    reason: str


@dataclass
class LoadedCorpus:
    samples: list[InstructionSample]
    issues: list[ValidationIssue] = field(default_factory=list)

    def __iter__(self):
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class CorpusStats:
    total: int
    by_source: dict[str, int]
    by_category: dict[str, int]
    oversized: int
    tokenizer: str = "whitespace"

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "by_source": dict(sorted(self.by_source.items())),
            "by_category": dict(sorted(self.by_category.items())),
            "oversized": self.oversized,
            "tokenizer": self.tokenizer,
        }


def _validate_record(
    record: object,
    index: int,
    seen_ids: set[str],
    tokenizer: Tokenizer,
) -> InstructionSample | ValidationIssue:
    if not isinstance(record, dict):
        return ValidationIssue(index, f"record is {type(record).__name__}, expected object")
    sample_id = record.get("id")
    if sample_id is None:
        sample_id = f"record-{index}"
    sample_id = str(sample_id)
    if sample_id in seen_ids:
        return ValidationIssue(index, f"duplicate id {sample_id!r}")
    instruction = record.get("instruction")
    code = record.get("code")
    if not isinstance(instruction, str) or not instruction.strip():
        return ValidationIssue(index, "instruction missing or blank")
    if not isinstance(code, str) or not code.strip():
        return ValidationIssue(index, "code missing or blank")
    source = record.get("source", "other")
    if source not in VALID_SOURCES:
        return ValidationIssue(index, f"unknown source {source!r}")
    category = record.get("category") or UNCATEGORIZED
    if not isinstance(category, str):
        return ValidationIssue(index, f"category must be a string, got {type(category).__name__}")
    token_count = tokenizer.count(instruction) + tokenizer.count(code)
    seen_ids.add(sample_id)
    return InstructionSample(
        id=sample_id,
        instruction=instruction,
        code=code,
        source=source,
        category=category,
        token_count=token_count,
    )


def load_corpus(
    path: str | Path,
    format: str = "jsonl",
    tokenizer: Tokenizer | None = None,
) -> LoadedCorpus:
    """Load and validate a corpus file.

    ``format`` is ``jsonl`` (one record per line, blank lines skipped) or
    ``json-array``.  Returns validated samples plus the per-record issues.
    Raises :class:`CorpusError` when the file itself is unreadable or does not
    parse as the declared format.
    """
    tokenizer = tokenizer or WhitespaceTokenizer()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    records: list[tuple[int, object]] = []
    issues: list[ValidationIssue] = []
    if format == "jsonl":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                issues.append(ValidationIssue(lineno, f"invalid JSON: {exc.msg}"))
    elif format == "json-array":
        if not text.strip():
            data: list = []
        else:
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path} does not parse as JSON: {exc}") from exc
            if not isinstance(data, list):
                raise CorpusError(f"{path}: expected a top-level JSON array")
        records = list(enumerate(data, start=1))
    else:
        raise CorpusError(f"unknown corpus format {format!r}")

    samples: list[InstructionSample] = []
    seen_ids: set[str] = set()
    for index, record in records:
        result = _validate_record(record, index, seen_ids, tokenizer)
        if isinstance(result, ValidationIssue):
            issues.append(result)
        else:
            samples.append(result)
    return LoadedCorpus(samples=samples, issues=issues)


def save_corpus(samples: Iterable[InstructionSample], path: str | Path) -> None:
    """Write samples as line-delimited JSON records."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(sample.to_record(), ensure_ascii=False) + "\n")


def corpus_stats(
    samples: Sequence[InstructionSample],
    max_input_tokens: int = DEFAULT_MAX_INPUT_TOKENS,
    tokenizer_name: str = "whitespace",
) -> CorpusStats:
    """Count samples per source and category, flagging oversized ones."""
    by_source: dict[str, int] = {}
    by_category: dict[str, int] = {}
    oversized = 0
    for sample in samples:
        by_source[sample.source] = by_source.get(sample.source, 0) + 1
        by_category[sample.category] = by_category.get(sample.category, 0) + 1
        if sample.token_count > max_input_tokens:
            oversized += 1
    return CorpusStats(
        total=len(samples),
        by_source=by_source,
        by_category=by_category,
        oversized=oversized,
        tokenizer=tokenizer_name,
    )


_AUGMENT_TEMPLATE = (
    "Write one clear natural-language instruction that asks for exactly the "
    "following code. Reply with the instruction only.\n\n{code}\n"
)


def augment_instruction(
    sample: InstructionSample,
    backend: "GenerationBackend",
    params=None,
) -> InstructionSample:
    """Regenerate a sample's instruction with a generation backend.

    The code field is never touched.  An empty backend reply rejects the
    augmentation and the original sample is returned unchanged; a backend
    failure raises :class:`AugmentationError` with the diagnostic attached.
    """
    from .backend import GenerationRequest
    from .decode import DecodingParams

    if params is None:
        params = DecodingParams(temperature=0.0, top_p=1.0, max_new_tokens=128, seed=0)
    request = GenerationRequest(prompt=_AUGMENT_TEMPLATE.format(code=sample.code), params=params, n=1)
    try:
        result = backend.generate(request)
    except BackendError as exc:
        raise AugmentationError(f"backend failed while augmenting {sample.id!r}: {exc}") from exc
    new_instruction = result.completions[0].strip()
    if not new_instruction:
        return sample
    return replace(sample, instruction=new_instruction)


def augment_corpus(
    samples: Sequence[InstructionSample],
    backend: "GenerationBackend",
    on_error: Callable[[InstructionSample, Exception], None] | None = None,
) -> list[InstructionSample]:
    """Augment every sample, keeping the original on per-sample failure."""
    out: list[InstructionSample] = []
    for sample in samples:
        try:
            out.append(augment_instruction(sample, backend))
        except AugmentationError as exc:
            if on_error is not None:
                on_error(sample, exc)
            out.append(sample)
    return out
