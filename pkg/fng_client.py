"""Fear & Greed index client -- alternative.me public API.

``GET <base_url>?limit=N&format=json`` returns the whole history when
``limit=0``. Transient failures (connection errors, timeouts, 429 and 5xx)
are retried with exponential backoff.
"""

from __future__ import annotations

import logging
import time

import requests

from config import DEFAULT_FNG_URL
from market_data import SentimentPoint, parse_fng_json

logger = logging.getLogger(__name__)

_REQUEST_TIMEOUT = 15
_RETRY_STATUSES = {429, 500, 502, 503, 504}


class FetchError(RuntimeError):
    """Raised when the index cannot be downloaded after all retries."""

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class FngClient:
    def __init__(
        self,
        base_url: str = DEFAULT_FNG_URL,
        retries: int = 3,
        backoff: float = 1.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url
        self.retries = max(1, retries)
        self.backoff = backoff
        self._session = session or requests.Session()

    def fetch_text(self, limit: int = 0) -> str:
        """Download the raw JSON document."""
        params = {"limit": limit, "format": "json"}
        status: int | None = None
        last_error = ""
        for attempt in range(1, self.retries + 1):
            try:
                resp = self._session.get(self.base_url, params=params, timeout=_REQUEST_TIMEOUT)
            except (requests.ConnectionError, requests.Timeout) as e:
                status, last_error = None, str(e)
            else:
                if resp.status_code < 400:
                    return resp.text
                status, last_error = resp.status_code, f"HTTP {resp.status_code}"
                if resp.status_code not in _RETRY_STATUSES:
                    break
            if attempt < self.retries:
                delay = self.backoff * 2 ** (attempt - 1)
                logger.warning(
                    "Fear & Greed fetch attempt %d/%d failed (%s), retrying in %.1fs.",
                    attempt, self.retries, last_error, delay,
                )
                time.sleep(delay)
        raise FetchError(f"Fear & Greed fetch from {self.base_url} failed: {last_error}", status=status)

    def fetch(self, limit: int = 0) -> list[SentimentPoint]:
        return parse_fng_json(self.fetch_text(limit))


def fetch_fng(base_url: str = DEFAULT_FNG_URL, limit: int = 0, retries: int = 3) -> list[SentimentPoint]:
    """Fetch and parse the index; ``limit=0`` means the full history."""
    return FngClient(base_url, retries=retries).fetch(limit)
