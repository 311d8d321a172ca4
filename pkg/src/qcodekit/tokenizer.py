"""Tokenizers for the toy model and for token-budget accounting.

Three implementations share one small interface:

* ``WhitespaceTokenizer`` -- counting-only fallback used for corpus stats and
  prompt budgets when no model tokenizer is active.
* ``ByteTokenizer`` -- UTF-8 byte-level vocabulary (256 bytes + specials),
  lossless for any text.
* ``CharTokenizer`` -- vocabulary built from a reference corpus, the smallest
  option for toy training runs.

All id-producing tokenizers reserve the same four specials: PAD, BOS, EOS and
SEP (the instruction/response boundary marker).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
SEP_ID = 3
_NUM_SPECIALS = 4


class Tokenizer(Protocol):
    name: str

    def count(self, text: str) -> int: ...


class SequenceTokenizer(Tokenizer, Protocol):
    vocab_size: int

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: Sequence[int]) -> str: ...


@dataclass(frozen=True)
class WhitespaceTokenizer:
    """Counts whitespace-separated tokens. Cannot encode to ids."""

    name: str = "whitespace"

    def count(self, text: str) -> int:
        return len(text.split())


class ByteTokenizer:
    """Byte-level tokenizer: id = byte value + number of specials."""

    name = "byte"

    def __init__(self) -> None:
        self.vocab_size = 256 + _NUM_SPECIALS

    def count(self, text: str) -> int:
        return len(text.encode("utf-8"))

    def encode(self, text: str) -> list[int]:
        return [b + _NUM_SPECIALS for b in text.encode("utf-8")]

    def decode(self, ids: Sequence[int]) -> str:
        data = bytes(i - _NUM_SPECIALS for i in ids if i >= _NUM_SPECIALS)
        return data.decode("utf-8", errors="replace")


class CharTokenizer:
    """Character-level tokenizer with a vocabulary fixed at construction.

    Characters outside the vocabulary are dropped on encode, so round-trips
    are exact only for text drawn from the reference corpus.
    """

    name = "char"

    def __init__(self, alphabet: Iterable[str]):
        chars = sorted(set(alphabet))
        self._char_to_id = {c: i + _NUM_SPECIALS for i, c in enumerate(chars)}
        self._id_to_char = {i: c for c, i in self._char_to_id.items()}
        self.vocab_size = len(chars) + _NUM_SPECIALS

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "CharTokenizer":
        return cls("".join(texts))

    def count(self, text: str) -> int:
        return sum(1 for c in text if c in self._char_to_id)

    def encode(self, text: str) -> list[int]:
        return [self._char_to_id[c] for c in text if c in self._char_to_id]

    def decode(self, ids: Sequence[int]) -> str:
        return "".join(self._id_to_char.get(i, "") for i in ids)


@dataclass
class EncodedPair:
    """An instruction/code pair encoded for next-token training.

    ``ids`` is BOS + instruction + SEP + code + EOS.  ``response_start`` is the
    index of the first code token; the loss mask covers the code span and the
    closing EOS only.
    """

    ids: list[int]
    response_start: int
    mask: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.mask:
            # mask[i] marks whether predicting ids[i+1] counts toward the loss
            self.mask = [
                1 if pos + 1 >= self.response_start else 0
                for pos in range(len(self.ids) - 1)
            ]


def encode_pair(
    tokenizer: SequenceTokenizer,
    instruction: str,
    code: str,
    max_len: int | None = None,
) -> EncodedPair:
    """Encode one training pair as BOS instr SEP code EOS, loss on the code span."""
    instr_ids = tokenizer.encode(instruction)
    code_ids = tokenizer.encode(code)
    ids = [BOS_ID, *instr_ids, SEP_ID, *code_ids, EOS_ID]
    if max_len is not None and len(ids) > max_len:
        ids = ids[:max_len]
    response_start = 2 + len(instr_ids)  # first id after SEP
    return EncodedPair(ids=ids, response_start=response_start)


def encode_prompt(tokenizer: SequenceTokenizer, instruction: str) -> list[int]:
    """Encode a generation prompt: BOS + instruction + SEP."""
    return [BOS_ID, *tokenizer.encode(instruction), SEP_ID]
