"""Generation backends: scripted mock, local toy model, remote HTTP client.

Every consumer talks to the same small interface, so the whole toolkit runs
hermetically against the mock, locally against the toy transformer, or
against an external inference server.  Local backends sample through the
decode module token by token; remote backends pass decoding parameters
through verbatim and results are labeled ``backend-native``.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
import torch

from .decode import DecodingParams, sample_token
from .errors import BackendError
from .tokenizer import EOS_ID, SequenceTokenizer, encode_prompt


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    params: DecodingParams
    n: int = 1

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be nonempty")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")


@dataclass
class GenerationResult:
    completions: list[str]
    backend_id: str
    latencies: list[float]
    sampled_by: str  # "local-decode" | "backend-native"
    errors: list[str | None] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.errors:
            self.errors = [None] * len(self.completions)


class GenerationBackend(Protocol):
    backend_id: str

    def generate(self, request: GenerationRequest) -> GenerationResult: ...


class MockBackend:
    """Scripted backend for hermetic tests and dry runs.

    ``script`` may be a list of completions (consumed in order, cycling), a
    callable ``(prompt, i) -> str``, or an Exception instance to raise.  No
    network or model is ever touched.
    """

    backend_id = "mock"

    def __init__(self, script: Sequence[str] | Callable[[str, int], str] | Exception = ("",)):
        self._script = script
        self._cursor = 0
        self.requests: list[GenerationRequest] = []

    @classmethod
    def solving(cls, prompt_to_completion: dict[str, str], default: str = "") -> "MockBackend":
        """Map exact prompt text to a completion; unknown prompts get default."""

        def script(prompt: str, _i: int) -> str:
            return prompt_to_completion.get(prompt, default)

        return cls(script)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        self.requests.append(request)
        if isinstance(self._script, Exception):
            raise BackendError(f"mock backend scripted failure: {self._script}", endpoint="mock")
        completions = []
        for i in range(request.n):
            if callable(self._script):
                completions.append(self._script(request.prompt, i))
            else:
                completions.append(self._script[self._cursor % len(self._script)])
                self._cursor += 1
        return GenerationResult(
            completions=completions,
            backend_id=self.backend_id,
            latencies=[0.0] * request.n,
            sampled_by="local-decode",
        )


class ToyBackend:
    """Local generation with the micro-transformer and the decode pipeline.

    Completion i of a request is drawn with seed ``params.seed + i`` so the
    n completions are distinct draws yet fully reproducible.  At temperature
    0 all completions are identical by construction (greedy); callers that
    care should inspect the outputs.
    """

    backend_id = "toy"

    def __init__(self, model, tokenizer: SequenceTokenizer):
        self.model = model
        self.tokenizer = tokenizer

    def _generate_one(self, prompt_ids: list[int], params: DecodingParams, seed: int) -> str:
        rng = np.random.default_rng(seed)
        ids = list(prompt_ids)
        max_len = self.model.config.max_seq_len
        generated: list[int] = []
        self.model.eval()
        with torch.no_grad():
            for _ in range(params.max_new_tokens):
                window = ids[-max_len:]
                logits = self.model(window)[-1].detach().cpu().numpy()
                token = sample_token(logits, params, rng)
                if token == EOS_ID:
                    break
                ids.append(token)
                generated.append(token)
        return self.tokenizer.decode(generated)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        prompt_ids = encode_prompt(self.tokenizer, request.prompt)
        completions, latencies = [], []
        for i in range(request.n):
            start = time.perf_counter()
            completions.append(self._generate_one(prompt_ids, request.params, request.params.seed + i))
            latencies.append(time.perf_counter() - start)
        return GenerationResult(
            completions=completions,
            backend_id=self.backend_id,
            latencies=latencies,
            sampled_by="local-decode",
        )


class RemoteBackend:
    """Client for an inference server speaking a flat JSON completion schema.

    POST {prompt, temperature, top_p, max_tokens, n, seed} and expect
    {"completions": [...]}.  Failures are retried with exponential backoff;
    after the last attempt a BackendError carries the endpoint and attempt
    count.  A short reply is padded with empty completions plus explicit
    per-completion error markers, never silently.
    """

    backend_id = "remote"

    def __init__(
        self,
        endpoint: str,
        token: str | None = None,
        model_name: str | None = None,
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        transport: Callable[[str, dict, float], dict] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.token = token
        self.model_name = model_name
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._transport = transport or self._requests_transport
        self._sleep = sleep

    def _requests_transport(self, url: str, payload: dict, timeout: float) -> dict:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        response = requests.post(url, json=payload, headers=headers, timeout=timeout)
        response.raise_for_status()
        return response.json()

    def generate(self, request: GenerationRequest) -> GenerationResult:
        payload = {
            "prompt": request.prompt,
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "max_tokens": request.params.max_new_tokens,
            "n": request.n,
            "seed": request.params.seed,
        }
        if self.model_name:
            payload["model"] = self.model_name
        last_error: Exception | None = None
        start = time.perf_counter()
        for attempt in range(1, self.retries + 1):
            try:
                body = self._transport(self.endpoint, payload, self.timeout)
                break
            except Exception as exc:
                last_error = exc
                if attempt < self.retries:
                    self._sleep(self.backoff * (2 ** (attempt - 1)))
        else:
            raise BackendError(
                f"remote backend {self.endpoint} failed after {self.retries} attempts: {last_error}",
                endpoint=self.endpoint,
                attempts=self.retries,
            )
        elapsed = time.perf_counter() - start
        completions = [str(c) for c in body.get("completions", [])]
        errors: list[str | None] = [None] * len(completions)
        while len(completions) < request.n:
            completions.append("")
            errors.append("backend returned fewer completions than requested")
        completions = completions[: request.n]
        errors = errors[: request.n]
        return GenerationResult(
            completions=completions,
            backend_id=self.backend_id,
            latencies=[elapsed / request.n] * request.n,
            sampled_by="backend-native",
            errors=errors,
        )


_FENCE_RE = re.compile(r"```(?:[\w+-]*)\n(.*?)```", re.DOTALL)


def extract_code(completion: str) -> str:
    """Pull fenced code blocks out of a completion, else return it whole."""
    blocks = _FENCE_RE.findall(completion)
    if blocks:
        return "\n\n".join(block.strip("\n") for block in blocks)
    return completion
