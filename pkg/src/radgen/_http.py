"""Shared HTTP plumbing: JSON POST with timeout/5xx retries.

Retry schedule: attempt i (0-based) may start no earlier than
``previous_attempt_start + base * 2**i``. A timed-out attempt has already
consumed more than the backoff window, so it retries immediately; fast
failures (refused connection, instant 5xx) wait out the schedule. This keeps
total fan-out latency bounded by timeout * (1 + retries) plus overhead.
"""
from __future__ import annotations

import json
import time

import requests

from .errors import ProtocolError, RetryableServiceError

BACKOFF_BASE_S = 0.25


def post_json(
    url: str,
    payload: dict,
    *,
    timeout_ms: int,
    max_retries: int,
) -> tuple[dict, int, int]:
    """POST ``payload`` as JSON; return (response body, attempts used, elapsed ms).

    Timeouts, connection errors, and 5xx responses are retried up to
    ``max_retries`` times, then raised as `RetryableServiceError`. 4xx
    responses and unparseable bodies raise `ProtocolError` immediately.
    """
    timeout_s = timeout_ms / 1000.0
    last_error = "no attempt made"
    for attempt in range(1, max_retries + 2):
        started = time.monotonic()
        try:
            response = requests.post(url, json=payload, timeout=timeout_s)
        except (requests.Timeout, requests.ConnectionError) as exc:
            last_error = f"{type(exc).__name__} contacting {url}"
        else:
            if response.status_code == 200:
                try:
                    body = response.json()
                except (json.JSONDecodeError, ValueError) as exc:
                    raise ProtocolError(f"non-JSON response from {url}: {exc}") from exc
                if not isinstance(body, dict):
                    raise ProtocolError(f"response from {url} is not a JSON object")
                elapsed_ms = int((time.monotonic() - started) * 1000)
                return body, attempt, elapsed_ms
            if 500 <= response.status_code < 600:
                last_error = f"HTTP {response.status_code} from {url}"
            else:
                raise ProtocolError(f"HTTP {response.status_code} from {url}")
        if attempt <= max_retries:
            resume_at = started + BACKOFF_BASE_S * (2 ** (attempt - 1))
            delay = resume_at - time.monotonic()
            if delay > 0:
                time.sleep(delay)
    raise RetryableServiceError(f"{last_error} after {max_retries + 1} attempts")
