"""Polite SERP fetching with proxy rotation and captcha back-off.

The clock is injectable so rate limiting and cooldowns can be tested in
virtual time; the HTTP session is injectable for the same reason.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Protocol, Union

import requests

from serpintent.errors import ConfigError, EmptyQuery, PreconditionError
from serpintent.serp_parser import SelectorConfig, detect_captcha

logger = logging.getLogger(__name__)

PROXY_ENV = "SERP_PROXIES"


class Clock(Protocol):
    def now(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class VirtualClock:
    """A clock that only moves when slept on."""

    def __init__(self, start: float = 1_700_000_000.0):
        self._t = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._t

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            with self._lock:
                self._t += seconds

    def advance(self, seconds: float) -> None:
        self.sleep(seconds)


@dataclass
class ProxyPool:
    proxies: list[str] = field(default_factory=list)
    cursor: int = 0
    cooldowns: dict[str, float] = field(default_factory=dict)
    # last request start per proxy; the direct connection is keyed by None
    last_used: dict[Optional[str], float] = field(default_factory=dict)

    def cool(self, proxy: str, until: float) -> None:
        self.cooldowns[proxy] = max(self.cooldowns.get(proxy, until), until)

    def cooling(self, now: float) -> list[str]:
        return [p for p in self.proxies if self.cooldowns.get(p, float("-inf")) > now]

    @classmethod
    def from_env(cls, default: Iterable[str] = ()) -> "ProxyPool":
        raw = os.environ.get(PROXY_ENV)
        if raw is None:
            return cls(list(default))
        return cls([p.strip() for p in raw.split(",") if p.strip()])


def next_proxy(pool: ProxyPool, now: float) -> Optional[str]:
    """Round-robin pick of the first proxy at/after the cursor that is not cooling down.

    Returns ``None`` for an empty pool or when every proxy is cooling.
    """
    n = len(pool.proxies)
    for step in range(n):
        i = (pool.cursor + step) % n
        proxy = pool.proxies[i]
        if pool.cooldowns.get(proxy, float("-inf")) <= now:
            pool.cursor = (i + 1) % n
            return proxy
    return None


class FetchStatus(enum.Enum):
    OK = "ok"
    CAPTCHA = "captcha"
    NETWORK_ERROR = "network_error"


@dataclass(frozen=True)
class FetchResult:
    query: str
    status: FetchStatus
    attempts: int
    body: Optional[str] = None
    proxy_used: Optional[str] = None
    fetched_at: Optional[str] = None

    def __post_init__(self):
        if (self.body is not None) != (self.status is FetchStatus.OK):
            raise ValueError("body must be present exactly when status is OK")
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")


@dataclass
class FetchConfig:
    endpoint_url: str
    output_dir: Path = Path("raw")
    min_delay_ms: int = 2000
    max_retries: int = 3
    captcha_cooldown_s: int = 600
    timeout_s: float = 15.0
    user_agents: list[str] = field(
        default_factory=lambda: [
            "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) "
            "Chrome/120.0 Safari/537.36",
            "Mozilla/5.0 (Windows NT 10.0; Win64; x64; rv:121.0) Gecko/20100101 Firefox/121.0",
        ]
    )

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        if not self.user_agents:
            raise ConfigError("user_agents must be non-empty")
        for name in ("min_delay_ms", "max_retries", "captcha_cooldown_s"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    @classmethod
    def from_dict(cls, obj: dict) -> "FetchConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown fetch config keys: {sorted(unknown)}")
        return cls(**obj)


def _rfc3339(ts: float) -> str:
    return datetime.fromtimestamp(ts, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class Fetcher:
    """Fetches queries through a shared :class:`ProxyPool`.

    The pool is only touched while holding ``self._lock``, so worker lanes
    in :meth:`fetch_all` lease proxies from a single owner.
    """

    def __init__(
        self,
        config: FetchConfig,
        pool: Optional[ProxyPool] = None,
        clock: Optional[Clock] = None,
        session: Optional[requests.Session] = None,
        selectors: Optional[SelectorConfig] = None,
    ):
        self.config = config
        self.pool = pool if pool is not None else ProxyPool()
        self.clock = clock or SystemClock()
        self.selectors = selectors or SelectorConfig.default()
        if session is None:
            session = requests.Session()
            # proxies come from the pool only, never from the environment
            session.trust_env = False
        self.session = session
        self._lock = threading.Lock()
        self._ua_cursor = 0
        self.request_log: list[tuple[Optional[str], float]] = []
        if not self.pool.proxies:
            logger.warning("proxy pool is empty; requests go out over a direct connection")

    def _lease(self) -> tuple[Optional[str], str, float]:
        """Pick a proxy and user agent and reserve the next request slot on that proxy."""
        delay = self.config.min_delay_ms / 1000.0
        while True:
            with self._lock:
                now = self.clock.now()
                proxy = next_proxy(self.pool, now)
                if proxy is None and self.pool.proxies:
                    wake = min(self.pool.cooldowns[p] for p in self.pool.proxies)
                else:
                    last = self.pool.last_used.get(proxy)
                    slot = now if last is None else max(now, last + delay)
                    self.pool.last_used[proxy] = slot
                    ua = self.config.user_agents[self._ua_cursor % len(self.config.user_agents)]
                    self._ua_cursor += 1
                    return proxy, ua, slot
            logger.info("all proxies cooling down; waiting %.1fs", wake - now)
            self.clock.sleep(wake - now)

    def _get(self, query: str, proxy: Optional[str], user_agent: str) -> requests.Response:
        proxies = {"http": proxy, "https": proxy} if proxy else None
        return self.session.get(
            self.config.endpoint_url,
            params={"q": query},
            headers={"User-Agent": user_agent},
            proxies=proxies,
            timeout=self.config.timeout_s,
        )

    def fetch(self, query: str) -> FetchResult:
        if not query or not query.strip():
            raise EmptyQuery("query must be non-empty")
        status = FetchStatus.NETWORK_ERROR
        proxy = None
        attempts = 0
        for _ in range(self.config.max_retries + 1):
            proxy, ua, slot = self._lease()
            wait = slot - self.clock.now()
            if wait > 0:
                self.clock.sleep(wait)
            attempts += 1
            started = self.clock.now()
            with self._lock:
                self.request_log.append((proxy, started))
            try:
                resp = self._get(query, proxy, ua)
            except requests.RequestException as exc:
                logger.warning("request for %r via %s failed: %s", query, proxy or "direct", exc)
                status = FetchStatus.NETWORK_ERROR
                continue

            if resp.status_code == 429 or detect_captcha(resp.text, self.selectors):
                status = FetchStatus.CAPTCHA
                until = self.clock.now() + self.config.captcha_cooldown_s
                logger.warning("captcha for %r via %s", query, proxy or "direct")
                if proxy is None:
                    self.clock.sleep(self.config.captcha_cooldown_s)
                else:
                    with self._lock:
                        self.pool.cool(proxy, until)
                continue
            if resp.status_code >= 400:
                logger.warning("HTTP %d for %r via %s", resp.status_code, query, proxy or "direct")
                status = FetchStatus.NETWORK_ERROR
                continue
            return FetchResult(
                query=query,
                status=FetchStatus.OK,
                attempts=attempts,
                body=resp.text,
                proxy_used=proxy,
                fetched_at=_rfc3339(started),
            )
        return FetchResult(query=query, status=status, attempts=attempts, proxy_used=proxy)

    def fetch_all(self, queries: Iterable[str], workers: int = 1) -> list[FetchResult]:
        queries = list(queries)
        if workers <= 1:
            return [self.fetch(q) for q in queries]
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(self.fetch, queries))


def fetch_query(
    query: str,
    config: FetchConfig,
    pool: ProxyPool,
    clock: Optional[Clock] = None,
    session: Optional[requests.Session] = None,
) -> FetchResult:
    return Fetcher(config, pool, clock=clock, session=session).fetch(query)


def raw_filename(query: str) -> str:
    return hashlib.sha256(query.encode("utf-8")).hexdigest()[:16] + ".json"


def persist_raw(result: FetchResult, output_dir: Union[str, Path]) -> Path:
    """Write an OK fetch as ``{"query", "fetched_at", "body"}`` JSON, overwriting any previous file."""
    if result.status is not FetchStatus.OK:
        raise PreconditionError(f"cannot persist a {result.status.value} result")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / raw_filename(result.query)
    payload = {"query": result.query, "fetched_at": result.fetched_at, "body": result.body}
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path
