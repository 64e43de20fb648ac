import numpy as np
import pytest

from spatialcrlb.channel import SpatialCorrelation, SystemConfig, doppler_corr, freq_corr, load_profile
from spatialcrlb.pilots import effective_A, gen_pilot_sequence, make_pattern, omega_of


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def eva_setup():
    """Paper-sized EVA configuration with a fixed QPSK pilot."""
    cfg = SystemConfig(sigma_n2=0.0, N_t=1000)
    prof = load_profile("EVA", cfg.T)
    pat = make_pattern(4, 8, 16, 128)
    x = gen_pilot_sequence("qpsk_random", 16, seed=1)
    pat = pat.with_sequence(x)
    A = effective_A(x, freq_corr(prof, cfg.N, pat.tones[0]))
    omega = omega_of(x, doppler_corr(16, 8, cfg.f_d, cfg.T))
    return cfg, SpatialCorrelation.paper_4x4(), pat, prof, A, omega


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report):
        ok, detail = report[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
