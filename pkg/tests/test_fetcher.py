import hashlib
import json

import pytest

from serpintent.errors import ConfigError, EmptyQuery, PreconditionError
from serpintent.fetcher import (
    FetchConfig,
    Fetcher,
    FetchResult,
    FetchStatus,
    ProxyPool,
    VirtualClock,
    next_proxy,
    persist_raw,
    raw_filename,
)

from mockserp import CAPTCHA_BODY, OK_BODY, MockServers, Script

# never resolved: every request must go through a mock proxy
REMOTE = "http://serp.invalid/search"


def test_next_proxy_empty_pool():
    assert next_proxy(ProxyPool(), 0.0) is None


def test_next_proxy_round_robin():
    pool = ProxyPool(["A", "B", "C"])
    assert [next_proxy(pool, 0.0) for _ in range(4)] == ["A", "B", "C", "A"]


def test_next_proxy_skips_cooling():
    pool = ProxyPool(["A", "B"], cooldowns={"A": 100.0})
    assert next_proxy(pool, 50.0) == "B"
    assert next_proxy(pool, 50.0) == "B"
    assert next_proxy(pool, 100.0) == "A"


def test_next_proxy_all_cooling():
    pool = ProxyPool(["A", "B"], cooldowns={"A": 10.0, "B": 20.0})
    assert next_proxy(pool, 5.0) is None
    assert pool.cooling(5.0) == ["A", "B"]
    assert pool.cooling(15.0) == ["B"]


def test_cool_never_shortens():
    pool = ProxyPool(["A"])
    pool.cool("A", 50.0)
    pool.cool("A", 20.0)
    assert pool.cooldowns["A"] == 50.0


def _config(tmp_path, **kw):
    kw.setdefault("min_delay_ms", 2000)
    return FetchConfig(endpoint_url=REMOTE, output_dir=tmp_path, timeout_s=5, **kw)


def test_ok_through_proxy(tmp_path):
    script = Script([(200, OK_BODY)])
    with MockServers(1, script) as srv:
        clock = VirtualClock(1_700_000_000.0)
        f = Fetcher(_config(tmp_path), ProxyPool(srv.urls), clock=clock)
        res = f.fetch("eiffel tower height")
    assert res.status is FetchStatus.OK
    assert res.attempts == 1
    assert res.body == OK_BODY
    assert res.proxy_used == srv.urls[0]
    assert res.fetched_at == "2023-11-14T22:13:20Z"
    name, path = script.seen[0]
    assert path.startswith("http://serp.invalid/search?q=eiffel+tower+height")


def test_captcha_twice_then_ok(tmp_path):
    script = Script([(200, CAPTCHA_BODY), (200, CAPTCHA_BODY), (200, OK_BODY)])
    with MockServers(3, script) as srv:
        clock = VirtualClock()
        pool = ProxyPool(srv.urls)
        res = Fetcher(_config(tmp_path, max_retries=3), pool, clock=clock).fetch("q")
    assert res.status is FetchStatus.OK and res.attempts == 3
    assert len(pool.cooling(clock.now())) == 2
    assert res.proxy_used == srv.urls[2]
    assert [s for s, _ in script.seen] == ["s0", "s1", "s2"]


def test_http_429_counts_as_captcha(tmp_path):
    script = Script([(429, "slow down"), (200, OK_BODY)])
    with MockServers(2, script) as srv:
        clock = VirtualClock()
        pool = ProxyPool(srv.urls)
        res = Fetcher(_config(tmp_path), pool, clock=clock).fetch("q")
    assert res.status is FetchStatus.OK and res.attempts == 2
    assert pool.cooling(clock.now()) == [srv.urls[0]]


def test_no_retries_left(tmp_path):
    script = Script([(200, CAPTCHA_BODY)])
    with MockServers(1, script) as srv:
        res = Fetcher(_config(tmp_path, max_retries=0), ProxyPool(srv.urls), clock=VirtualClock()).fetch("q")
    assert res.status is FetchStatus.CAPTCHA
    assert res.attempts == 1 and res.body is None


def test_server_error_is_network_error(tmp_path):
    script = Script([], default=(503, "down"))
    with MockServers(1, script) as srv:
        res = Fetcher(_config(tmp_path, max_retries=2), ProxyPool(srv.urls), clock=VirtualClock()).fetch("q")
    assert res.status is FetchStatus.NETWORK_ERROR and res.attempts == 3


def test_unreachable_proxy_is_network_error(tmp_path):
    with MockServers(1, Script([])) as srv:
        dead = srv.urls[0]
    res = Fetcher(_config(tmp_path, max_retries=1), ProxyPool([dead]), clock=VirtualClock()).fetch("q")
    assert res.status is FetchStatus.NETWORK_ERROR and res.attempts == 2


def test_all_proxies_cooling_waits_for_earliest(tmp_path):
    script = Script([(200, CAPTCHA_BODY), (200, OK_BODY)])
    with MockServers(1, script) as srv:
        clock = VirtualClock(0.0)
        f = Fetcher(_config(tmp_path, captcha_cooldown_s=600), ProxyPool(srv.urls), clock=clock)
        res = f.fetch("q")
    assert res.status is FetchStatus.OK and res.attempts == 2
    assert f.request_log[1][1] - f.request_log[0][1] >= 600


def test_spacing_per_proxy_under_virtual_clock(tmp_path):
    with MockServers(2, Script([])) as srv:
        clock = VirtualClock()
        f = Fetcher(_config(tmp_path, min_delay_ms=2000), ProxyPool(srv.urls), clock=clock)
        results = f.fetch_all([f"query {i}" for i in range(6)])
    assert all(r.status is FetchStatus.OK for r in results)
    by_proxy = {}
    for proxy, t in f.request_log:
        by_proxy.setdefault(proxy, []).append(t)
    assert set(by_proxy) == set(srv.urls)
    for times in by_proxy.values():
        assert all(b - a >= 2.0 for a, b in zip(times, times[1:]))


def test_spacing_holds_with_worker_lanes(tmp_path):
    with MockServers(2, Script([])) as srv:
        clock = VirtualClock()
        f = Fetcher(_config(tmp_path, min_delay_ms=1000), ProxyPool(srv.urls), clock=clock)
        results = f.fetch_all([f"q{i}" for i in range(8)], workers=4)
    assert [r.query for r in results] == [f"q{i}" for i in range(8)]
    by_proxy = {}
    for proxy, t in f.request_log:
        by_proxy.setdefault(proxy, []).append(t)
    for times in by_proxy.values():
        times.sort()
        assert all(b - a >= 1.0 - 1e-9 for a, b in zip(times, times[1:]))


def test_user_agents_rotate(tmp_path):
    f = Fetcher(_config(tmp_path, user_agents=["ua1", "ua2"]), ProxyPool(["p"]), clock=VirtualClock())
    assert [f._lease()[1] for _ in range(3)] == ["ua1", "ua2", "ua1"]


def test_empty_query_rejected(tmp_path):
    with pytest.raises(EmptyQuery):
        Fetcher(_config(tmp_path), ProxyPool(["p"]), clock=VirtualClock()).fetch("   ")


def test_config_validation():
    with pytest.raises(ConfigError):
        FetchConfig.from_dict({"endpoint_url": REMOTE, "proxies": []})
    with pytest.raises(ConfigError):
        FetchConfig(endpoint_url=REMOTE, user_agents=[])
    with pytest.raises(ConfigError):
        FetchConfig(endpoint_url=REMOTE, max_retries=-1)


def test_raw_filename_is_hash_prefix():
    expected = hashlib.sha256(b"apple").hexdigest()[:16]
    assert raw_filename("apple") == expected + ".json"
    assert raw_filename("apple") == "3a7bd3e2360a3d29.json"


def test_persist_raw_idempotent(tmp_path):
    res = FetchResult("apple", FetchStatus.OK, 1, body="<p>x</p>", proxy_used="p", fetched_at="2024-01-01T00:00:00Z")
    p1 = persist_raw(res, tmp_path)
    first = p1.read_bytes()
    p2 = persist_raw(res, tmp_path)
    assert p1 == p2 == tmp_path / "3a7bd3e2360a3d29.json"
    assert p2.read_bytes() == first
    assert json.loads(first) == {"query": "apple", "fetched_at": "2024-01-01T00:00:00Z", "body": "<p>x</p>"}
    assert sorted(x.name for x in tmp_path.iterdir()) == ["3a7bd3e2360a3d29.json"]


def test_persist_requires_ok(tmp_path):
    with pytest.raises(PreconditionError):
        persist_raw(FetchResult("apple", FetchStatus.CAPTCHA, 2), tmp_path)


def test_result_body_invariant():
    with pytest.raises(ValueError):
        FetchResult("q", FetchStatus.OK, 1)
    with pytest.raises(ValueError):
        FetchResult("q", FetchStatus.CAPTCHA, 1, body="x")


def test_pool_from_env(monkeypatch):
    monkeypatch.setenv("SERP_PROXIES", "http://a:1, http://b:2,,")
    assert ProxyPool.from_env().proxies == ["http://a:1", "http://b:2"]
    monkeypatch.delenv("SERP_PROXIES")
    assert ProxyPool.from_env(["x"]).proxies == ["x"]
