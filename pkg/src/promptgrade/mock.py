"""Deterministic in-process endpoint for offline demo runs.

Implements just enough of the chat-completions wire shape to drive the full
pipeline without a model server: scoring-style prompts get prose feedback plus
a JSON score drawn from the advertised range, feedback-only prompts get prose
without a score (exercising the re-prompt path), judge prompts get a
helpfulness JSON. Responses are a pure function of (prompt, seed).
"""

from __future__ import annotations

import hashlib
import json
import re

import httpx

_RANGE_RE = re.compile(r"(\d+)\u2013(\d+)")
_NUMBER_RE = re.compile(r"-?\d+")

_FEEDBACK_SENTENCES = (
    "The essay states a clear position but supports it with only one example.",
    "The response addresses the task, though several claims lack evidence from the text.",
    "The writing is organized, but transitions between ideas are abrupt.",
    "The conclusion restates the opening instead of extending the argument.",
)


def _digest(seed: int, prompt: str) -> int:
    material = f"{seed}|{prompt}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def mock_response_text(prompt: str, seed: int = 0) -> str:
    """The canned completion for a prompt; stable across calls."""
    d = _digest(seed, prompt)
    if "evaluate the helpfulness of the feedback" in prompt.lower():
        return json.dumps({"helpfulness": 1 + d % 10})
    if "Extract the numeric essay score from the response above." in prompt:
        quoted = prompt.split('#### Response: "', 1)[-1]
        found = _NUMBER_RE.search(quoted)
        if found:
            return json.dumps({"score": int(found.group(0))})
        return json.dumps({"score": None})
    sentence = _FEEDBACK_SENTENCES[d % len(_FEEDBACK_SENTENCES)]
    range_match = _RANGE_RE.search(prompt)
    if range_match:
        lo, hi = int(range_match.group(1)), int(range_match.group(2))
        score = lo + d % (hi - lo + 1)
        return f'{sentence} {{"score": {score}}}'
    return sentence


def mock_transport(seed: int = 0) -> httpx.MockTransport:
    """httpx transport that answers /v1/chat/completions deterministically."""

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content.decode("utf-8"))
        prompt = payload["messages"][0]["content"]
        text = mock_response_text(prompt, seed=seed)
        return httpx.Response(
            200,
            json={
                "choices": [
                    {
                        "message": {"role": "assistant", "content": text},
                        "finish_reason": "stop",
                    }
                ]
            },
        )

    return httpx.MockTransport(handler)
