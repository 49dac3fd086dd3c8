import os
import random

import pytest
from hypothesis import HealthCheck, settings

from transit_so.benchmarks import hk_lite, random_instance, toy_1line, toy_2line
from transit_so.loader import Assignment

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def hk():
    return hk_lite()


@pytest.fixture(scope="session")
def hk_ext():
    return hk_lite(extended_routes=True)


@pytest.fixture
def toy1():
    return toy_1line()


@pytest.fixture
def toy2():
    return toy_2line()


def random_q(inst, rng, integer=True):
    """Every passenger on a uniformly random servable option."""
    q = {}
    for k in inst.od_pairs:
        opts = inst.options(k.id)
        if integer:
            for _ in range(k.demand):
                key = (k.id,) + rng.choice(opts)
                q[key] = q.get(key, 0) + 1
        else:
            w = [rng.random() for _ in opts]
            s = sum(w)
            for o, x in zip(opts, w):
                q[(k.id,) + o] = k.demand * x / s
    return Assignment(q, integer)


def instances(seed, n, **kw):
    rng = random.Random(seed)
    return [random_instance(rng, **kw) for _ in range(n)]


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``; the test still asserts."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(n: int, ok: bool, detail: str):
        lines.append((n, "PASS" if ok else "FAIL", detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n, status, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
