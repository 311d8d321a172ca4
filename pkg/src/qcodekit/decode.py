"""Token sampling: temperature scaling and nucleus (top-p) filtering.

The sampling pipeline is temperature -> softmax -> nucleus filter ->
categorical draw.  Temperature 0 is defined as greedy argmax (lowest index
wins ties) rather than as a limit of the division; top_p = 0 degenerates to
the single most probable token via the at-least-one rule.  All operations are
pure given an explicit numpy generator, so parallel workers can each own a
seeded generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SUM_TOLERANCE = 1e-6


class GreedyMarker:
    """Sentinel returned by apply_temperature at T=0: downstream must argmax."""

    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover
        return "GREEDY"


GREEDY = GreedyMarker()


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.5
    top_p: float = 0.5
    max_new_tokens: int = 256
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if not 0.0 <= self.top_p <= 1.0:
            raise ValueError(f"top_p must be in [0, 1], got {self.top_p}")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")


def apply_temperature(logits, temperature: float):
    """Scale logits by 1/T, or return the GREEDY marker at T=0."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise ValueError("logits must be nonempty")
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logit")
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return GREEDY
    return logits / temperature


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax (max subtraction)."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def nucleus_filter(probs, top_p: float) -> np.ndarray:
    """Zero out tokens outside the smallest top-p probability prefix.

    Tokens are ordered by descending probability with ties broken by
    ascending index; the kept prefix is the shortest whose cumulative mass
    reaches ``top_p``, never smaller than one token.  Kept mass is
    renormalized to sum to 1.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("probs must be a nonempty 1-d vector")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("probs must be finite and nonnegative")
    if abs(probs.sum() - 1.0) > _SUM_TOLERANCE:
        raise ValueError(f"probs must sum to 1 +/- {_SUM_TOLERANCE}, got {probs.sum()}")
    if not 0.0 <= top_p <= 1.0:
        raise ValueError(f"top_p must be in [0, 1], got {top_p}")

    # stable sort on negated probs: descending prob, ties by ascending index
    order = np.argsort(-probs, kind="stable")
    cumulative = np.cumsum(probs[order])
    cutoff = int(np.searchsorted(cumulative, top_p, side="left"))
    keep = order[: min(cutoff + 1, probs.size)]

    filtered = np.zeros_like(probs)
    filtered[keep] = probs[keep]
    return filtered / filtered.sum()


def sample_token(logits, params: DecodingParams, rng: np.random.Generator) -> int:
    """Draw one token index through the full decoding pipeline."""
    scaled = apply_temperature(logits, params.temperature)
    if scaled is GREEDY:
        return int(np.argmax(np.asarray(logits)))
    probs = nucleus_filter(softmax(scaled), params.top_p)
    return int(rng.choice(probs.size, p=probs))
