"""Chat-completions client, prompt assembly, and the pairwise judge protocol.

Mock mode needs no network and is a pure function of (model, prompt):
"echo" returns the prompt's context blocks verbatim, "extract:<pattern>"
returns the first block containing the pattern, "fixed:<text>" returns the
text. The judge runs each comparison twice with the summaries swapped and
averages the win rate, cancelling position bias.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field

import requests

from .corpus import Segment
from .errors import ExternalServiceError, ParameterError

log = logging.getLogger(__name__)

QA_INSTRUCTION = ("Answer the question using only the provided context; "
                  "answer concisely.")
SUMMARY_INSTRUCTION = ("Summarize the following content faithfully and "
                       "concisely; cover every distinct topic it contains.")

_CONTEXT_BLOCK = re.compile(r"^\[(\d+)\] (.*)$", re.MULTILINE)
_RETRYABLE = {429, 500, 502, 503, 504}


class LlmMode(enum.Enum):
    LIVE = "live"
    MOCK = "mock"


@dataclass(frozen=True)
class LlmConfig:
    model: str
    mode: LlmMode = LlmMode.MOCK
    base_url: str = ""
    api_key_env: str = "LLM_API_KEY"
    max_output_tokens: int = 512
    temperature: float = 0.0
    timeout_s: float = 30.0
    retry_backoff_s: float = 0.5
    max_concurrency: int = 4

    def __post_init__(self):
        if self.temperature < 0:
            raise ParameterError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ParameterError("max_output_tokens must be >= 1")

    def resolve_api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise ParameterError(
                f"live mode needs an API key in ${self.api_key_env}")
        return key


def _format_blocks(segments: list[Segment]) -> str:
    return "\n".join(f"[{i}] {seg.text}" for i, seg in enumerate(segments, start=1))


def build_qa_prompt(ordered_segments: list[Segment], query: str) -> str:
    """Instruction header, numbered context blocks in the given order, then
    the question."""
    if not ordered_segments:
        raise ParameterError("prompt needs at least one segment")
    if not query.strip():
        raise ParameterError("query is empty")
    return (f"{QA_INSTRUCTION}\n\nContext:\n{_format_blocks(ordered_segments)}"
            f"\n\nQuestion: {query}")


def build_summary_prompt(ordered_segments: list[Segment]) -> str:
    if not ordered_segments:
        raise ParameterError("prompt needs at least one segment")
    return (f"{SUMMARY_INSTRUCTION}\n\nContent:\n"
            f"{_format_blocks(ordered_segments)}")


def _context_blocks(prompt: str) -> list[str]:
    return [m.group(2) for m in _CONTEXT_BLOCK.finditer(prompt)]


def _mock_complete(model: str, prompt: str) -> str:
    if model == "echo":
        return "\n".join(_context_blocks(prompt))
    if model.startswith("extract:"):
        pattern = model[len("extract:"):]
        for block in _context_blocks(prompt):
            if pattern in block:
                return block
        return ""
    if model.startswith("fixed:"):
        return model[len("fixed:"):]
    raise ParameterError(f"unknown mock model {model!r}")


def _live_complete(cfg: LlmConfig, prompt: str) -> str:
    if not cfg.base_url:
        raise ParameterError("live mode needs base_url")
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    body = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
    }
    headers = {"Authorization": f"Bearer {cfg.resolve_api_key()}"}
    attempts = 3
    last_status: int | None = None
    for attempt in range(1, attempts + 1):
        try:
            resp = requests.post(url, json=body, headers=headers,
                                 timeout=cfg.timeout_s)
        except requests.RequestException as exc:
            last_status = None
            if attempt == attempts:
                raise ExternalServiceError(
                    f"LLM request failed after {attempt} attempts: {exc}",
                    status=None, attempts=attempt) from exc
        else:
            if resp.status_code == 200:
                try:
                    payload = resp.json()
                    choice = payload["choices"][0]
                    if "message" in choice:
                        return choice["message"]["content"]
                    return choice["text"]
                except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                    raise ExternalServiceError(
                        f"malformed LLM response: {exc}", status=200,
                        attempts=attempt) from exc
            last_status = resp.status_code
            if resp.status_code not in _RETRYABLE or attempt == attempts:
                raise ExternalServiceError(
                    f"LLM returned HTTP {resp.status_code} after {attempt} attempts",
                    status=resp.status_code, attempts=attempt)
        time.sleep(cfg.retry_backoff_s * (2 ** (attempt - 1)))
    raise ExternalServiceError(  # unreachable; loop always raises or returns
        f"LLM failed after {attempts} attempts", status=last_status,
        attempts=attempts)


def complete(cfg: LlmConfig, prompt: str) -> str:
    """Return the model's reply for a prompt; mock mode is deterministic."""
    if not prompt:
        raise ParameterError("prompt is empty")
    if cfg.mode is LlmMode.MOCK:
        return _mock_complete(cfg.model, prompt)
    return _live_complete(cfg, prompt)


class Preference(enum.Enum):
    A = "A"
    B = "B"
    TIE = "TIE"


@dataclass(frozen=True)
class JudgeOutcome:
    run_ab_winner: Preference   # winners in original-label space
    run_ba_winner: Preference
    win_rate_a: float
    warnings: tuple[str, ...] = field(default=())


def _judge_prompt(first: str, second: str, reference: str | None) -> str:
    lines = [
        "You are comparing two candidate summaries of the same source.",
        "Reply with a single token: A if Summary A is better, B if Summary B "
        "is better, or TIE if they are equally good.",
    ]
    if reference is not None:
        lines.append("Judge quality as fidelity to the reference summary below.")
        lines.append(f"\nReference:\n{reference}")
    lines.append(f"\nSummary A:\n{first}")
    lines.append(f"\nSummary B:\n{second}")
    return "\n".join(lines)


def _parse_choice(reply: str) -> tuple[str | None, str | None]:
    """First token of the reply mapped to a presentation slot.

    Returns (slot, warning): slot "first"/"second"/"tie", or None with a
    warning when the reply does not start with a forced-choice token.
    """
    tokens = re.findall(r"[A-Za-z]+", reply)
    head = tokens[0].upper() if tokens else ""
    if head in ("A", "FIRST"):
        return "first", None
    if head in ("B", "SECOND"):
        return "second", None
    if head == "TIE":
        return "tie", None
    return None, f"unparseable judge reply {reply[:80]!r}; counted as tie"


def _slot_to_label(slot: str, a_is_first: bool) -> Preference:
    if slot == "tie":
        return Preference.TIE
    if slot == "first":
        return Preference.A if a_is_first else Preference.B
    return Preference.B if a_is_first else Preference.A


def judge_pair(cfg: LlmConfig, summary_a: str, summary_b: str,
               reference: str | None = None) -> JudgeOutcome:
    """Position-swap judging: one run per presentation order, win rate
    averaged over both runs (win 1, tie 0.5, loss 0)."""
    if not summary_a.strip() or not summary_b.strip():
        raise ParameterError("both summaries must be non-empty")
    warnings: list[str] = []
    winners: list[Preference] = []
    for a_is_first in (True, False):
        first, second = (summary_a, summary_b) if a_is_first else (summary_b, summary_a)
        reply = complete(cfg, _judge_prompt(first, second, reference))
        slot, warning = _parse_choice(reply)
        if slot is None:
            warnings.append(warning)
            log.warning("%s", warning)
            winners.append(Preference.TIE)
        else:
            winners.append(_slot_to_label(slot, a_is_first))
    credit = {Preference.A: 1.0, Preference.TIE: 0.5, Preference.B: 0.0}
    win_rate_a = (credit[winners[0]] + credit[winners[1]]) / 2.0
    return JudgeOutcome(run_ab_winner=winners[0], run_ba_winner=winners[1],
                        win_rate_a=win_rate_a, warnings=tuple(warnings))
