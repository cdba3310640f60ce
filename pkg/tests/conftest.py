import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bacnoma.config import SystemConfig
from bacnoma.geometry import complex_normal, prewhiten, sample_geometry, sample_sdma_channels
from bacnoma.legacy import build_beamformers, interference_budgets, interference_matrix
from bacnoma.sdma import draw_excitation
from bacnoma.solver import FeasibleRegion

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class SdmaInstance:
    """Everything needed to evaluate Problems 1 and 3 on one realization."""

    def __init__(self, rng, n=4, k=4, m=3, alpha=1e-3, **kw):
        self.cfg = SystemConfig(n_antennas=n, n_downlink=k, n_devices=m, alpha=alpha, **kw)
        while True:
            ch = sample_sdma_channels(self.cfg, sample_geometry(self.cfg, rng), rng)
            try:
                self.w = build_beamformers(ch)
                break
            except ValueError:
                continue
        self.ch = ch
        self.wh = prewhiten(self.cfg, ch)
        self.exc = draw_excitation(ch.h, self.w, self.cfg.p0, rng)
        tau = interference_budgets(ch, self.w, self.cfg.tau_policy, self.cfg.p0, self.cfg.sigma2)
        self.region = FeasibleRegion(interference_matrix(ch, self.w), tau)


@pytest.fixture
def sdma_instance(rng):
    return lambda **kw: SdmaInstance(rng, **kw)


def random_mac(rng, dim, m, scale=10.0):
    """Effective-channel matrix with columns of widely varying strength."""
    gains = scale * 10.0 ** rng.uniform(-1, 1, size=m)
    return complex_normal(rng, (dim, m)) * np.sqrt(gains)[None, :]


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def report(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
