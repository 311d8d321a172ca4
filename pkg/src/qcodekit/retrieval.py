"""Dense retrieval over the instruction corpus and few-shot prompt assembly.

Retrieval is a three-step pipeline: embed the query, rank corpus entries by
cosine similarity, and concatenate the best instruction-code pairs into the
prompt.  Two embedders are provided: a deterministic feature-hashing embedder
(fully offline, the default) and an HTTP client for an external embedding
service.  The corpus is small enough that exact full-scan search is used;
there is no approximate-NN structure.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import InstructionSample
from .errors import IndexBuildError, PromptBudgetError, RetrievalBackendError
from .tokenizer import Tokenizer, WhitespaceTokenizer

HASH_DIM = 256
DEFAULT_TOP_K = 3

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class Embedder(Protocol):
    name: str
    dim: int

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _hash_bucket(token: str, dim: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % dim


class HashingEmbedder:
    """Feature hashing: token counts into sha256 buckets, L2-normalized.

    Deterministic across processes (no salted hashes).  Text with no
    alphanumeric tokens is hashed whole so nonempty text never embeds to the
    zero vector.
    """

    name = "hash"

    def __init__(self, dim: int = HASH_DIM):
        self.dim = dim

    def tokens(self, text: str) -> list[str]:
        found = _TOKEN_RE.findall(text.lower())
        return found if found else [text]

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for row, text in enumerate(texts):
            if not text:
                raise ValueError("cannot embed empty text")
            for token in self.tokens(text):
                out[row, _hash_bucket(token, self.dim)] += 1.0
            out[row] /= np.linalg.norm(out[row])
        return out


class HttpEmbedder:
    """Client for an external embedding service.

    Wire contract: POST {"texts": [...]} -> {"vectors": [[...], ...]}.  The
    endpoint and auth token come from configuration; ``transport`` is
    injectable for tests.
    """

    name = "http"

    def __init__(self, endpoint: str, dim: int, token: str | None = None, timeout: float = 60.0, transport=None):
        self.endpoint = endpoint
        self.dim = dim
        self.token = token
        self.timeout = timeout
        self._transport = transport or self._requests_transport

    def _requests_transport(self, payload: dict) -> dict:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        response = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        for text in texts:
            if not text:
                raise ValueError("cannot embed empty text")
        try:
            body = self._transport({"texts": list(texts)})
        except Exception as exc:
            raise RetrievalBackendError(
                f"embedding service at {self.endpoint} failed: {exc}"
            ) from exc
        vectors = np.asarray(body.get("vectors"), dtype=np.float32)
        if vectors.shape != (len(texts), self.dim):
            raise RetrievalBackendError(
                f"embedding service returned shape {vectors.shape}, expected {(len(texts), self.dim)}"
            )
        return vectors


def embed(text: str, embedder: Embedder) -> np.ndarray:
    """Embed one nonempty text; deterministic per (embedder, text)."""
    if not text:
        raise ValueError("cannot embed empty text")
    return embedder.embed_batch([text])[0]


@dataclass(frozen=True)
class RetrievalHit:
    sample_id: str
    score: float
    rank: int


@dataclass
class Index:
    """Immutable id -> vector store with exact cosine search."""

    ids: list[str]
    vectors: np.ndarray  # (n, dim) float32
    embedder_name: str

    def __len__(self) -> int:
        return len(self.ids)

    def query(self, text: str, k: int, embedder: Embedder) -> list[RetrievalHit]:
        return query_top_k(self, text, k, embedder)


def build_index(samples: Sequence[InstructionSample], embedder: Embedder) -> Index:
    """Embed every sample's instruction, one entry per unique id."""
    ids = [s.id for s in samples]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise IndexBuildError(f"duplicate sample ids in corpus: {dupes[:5]}")
    if not samples:
        return Index(ids=[], vectors=np.zeros((0, embedder.dim), dtype=np.float32), embedder_name=embedder.name)
    vectors = embedder.embed_batch([s.instruction for s in samples]).astype(np.float32)
    return Index(ids=ids, vectors=vectors, embedder_name=embedder.name)


def query_top_k(index: Index, text: str, k: int, embedder: Embedder) -> list[RetrievalHit]:
    """Exact top-k by cosine similarity; ties broken by ascending sample id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(index) == 0:
        return []
    query_vec = embed(text, embedder).astype(np.float64)
    query_norm = np.linalg.norm(query_vec)
    vectors = index.vectors.astype(np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    scores = (vectors @ query_vec) / (norms * query_norm)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.ids[i]))
    top = order[: min(k, len(index))]
    return [
        RetrievalHit(sample_id=index.ids[i], score=float(scores[i]), rank=rank)
        for rank, i in enumerate(top, start=1)
    ]


def save_index(index: Index, out_dir: str | Path) -> Path:
    """Persist as manifest.json + vectors.npy (little-endian fp32, row-major)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.save(out_dir / "vectors.npy", index.vectors.astype("<f4"))
    manifest = {
        "format_version": 1,
        "embedder": index.embedder_name,
        "dim": int(index.vectors.shape[1]) if index.vectors.size else HASH_DIM,
        "count": len(index),
        "ids": index.ids,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def load_index(index_dir: str | Path) -> Index:
    index_dir = Path(index_dir)
    try:
        manifest = json.loads((index_dir / "manifest.json").read_text(encoding="utf-8"))
        vectors = np.load(index_dir / "vectors.npy")
    except (OSError, json.JSONDecodeError) as exc:
        raise IndexBuildError(f"cannot load index from {index_dir}: {exc}") from exc
    ids = manifest["ids"]
    if len(ids) != vectors.shape[0]:
        raise IndexBuildError(
            f"index manifest lists {len(ids)} ids but vectors file has {vectors.shape[0]} rows"
        )
    return Index(ids=list(ids), vectors=vectors.astype(np.float32), embedder_name=manifest["embedder"])


@dataclass
class AssembledPrompt:
    text: str
    included_ids: list[str]
    token_count: int
    budget: int


_PROMPT_HEADER = "Reference examples follow. Use them to answer the final task.\n"
_PAIR_TEMPLATE = "\n### Example\nInstruction: {instruction}\nCode:\n{code}\n"
_TASK_TEMPLATE = "\n### Task\nInstruction: {query}\nCode:\n"


def assemble_context(
    hits: Sequence[RetrievalHit],
    corpus: dict[str, InstructionSample] | Sequence[InstructionSample],
    user_query: str,
    budget: int,
    tokenizer: Tokenizer | None = None,
) -> AssembledPrompt:
    """Greedily concatenate whole retrieved pairs under a token budget.

    Pairs are taken in descending score order; a pair that would overflow the
    budget is skipped whole (never truncated mid-pair) and later pairs may
    still fit.  The user query is always present; if even the bare template
    plus query exceeds the budget, assembly fails.
    """
    tokenizer = tokenizer or WhitespaceTokenizer()
    if not isinstance(corpus, dict):
        corpus = {s.id: s for s in corpus}
    base_text = _PROMPT_HEADER + _TASK_TEMPLATE.format(query=user_query)
    base_tokens = tokenizer.count(base_text)
    if base_tokens > budget:
        raise PromptBudgetError(
            f"budget {budget} cannot hold the user query alone ({base_tokens} tokens)"
        )
    middle: list[str] = []
    included: list[str] = []
    used = base_tokens
    for hit in hits:
        sample = corpus.get(hit.sample_id)
        if sample is None:
            continue
        pair_text = _PAIR_TEMPLATE.format(instruction=sample.instruction, code=sample.code)
        pair_tokens = tokenizer.count(pair_text)
        if used + pair_tokens > budget:
            continue
        middle.append(pair_text)
        included.append(hit.sample_id)
        used += pair_tokens
    text = _PROMPT_HEADER + "".join(middle) + _TASK_TEMPLATE.format(query=user_query)
    return AssembledPrompt(
        text=text,
        included_ids=included,
        token_count=tokenizer.count(text),
        budget=budget,
    )
