import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dadqc.graphs import build_complete, sample_d_factor
from dadqc.ising import IsingParams, from_angles

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_params(n, d, seed, scale=1.0):
    """Random couplings on a sampled d-factor of K_n (uniform in [-scale, scale])."""
    rng = np.random.default_rng(seed)
    g = sample_d_factor(build_complete(n), d, int(rng.integers(1 << 30)))
    return IsingParams(g, rng.uniform(-scale, scale, n), rng.uniform(-scale, scale, g.m))


def grid_params(n, d, seed, beta):
    rng = np.random.default_rng(seed)
    g = sample_d_factor(build_complete(n), d, int(rng.integers(1 << 30)))
    return from_angles(g, rng.integers(0, 8, n) * math.pi / 8, rng.integers(0, 8, g.m) * math.pi / 8, beta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
