"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary (see ``conftest.py``).
"""

import math
import time
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from spatialcrlb import bounds as bd
from spatialcrlb import experiments as ex
from spatialcrlb import numkernel as nk
from spatialcrlb.channel import (SpatialCorrelation, SystemConfig, build_sigma, doppler_corr, freq_corr,
                                 load_profile, sample_channel_matrices)
from spatialcrlb.config import ExperimentConfig, Sweep
from spatialcrlb.estimator import sample_autocorrelation
from spatialcrlb.pilots import effective_A, gen_pilot_sequence, make_pattern, omega_of
from spatialcrlb.report import emit

REPORT = {}


def record(n, ok, detail):
    REPORT[n] = (bool(ok), detail)
    return ok


# --------------------------------------------------------------------------
# 1. noiseless reproduction
# --------------------------------------------------------------------------

def test_criterion_1_noiseless_avgmse_tracks_bound():
    problems, notes = [], []
    literal_misses = 0
    for prof in ("EVA", "ETU"):
        cfg = ExperimentConfig(trials=20, sweep=Sweep(N_t=[100, 300, 1000, 3000], L_s=[1, 4, "rank"],
                                                      profiles=[prof]))
        t0 = time.perf_counter()
        rows = ex.run_fig1(cfg)
        elapsed = time.perf_counter() - t0
        if elapsed >= 180:
            problems.append(f"{prof} runtime {elapsed:.0f}s")
        for L_s in sorted({r.L_s for r in rows}):
            pts = sorted((r for r in rows if r.L_s == L_s), key=lambda r: r.N_t)
            ratio = np.array([r.avgmse / r.avgmse_lb_asymptotic for r in pts])
            rel_se = np.array([r.avgmse_se / r.avgmse_lb_asymptotic for r in pts])
            # the MLE's expected ratio is exactly 1, so the lower edge carries MC slack
            lower = 1.0 - 2.0 * rel_se
            if np.any(ratio > 1.25) or np.any(ratio < lower):
                problems.append(f"{prof} L_s={L_s} ratios {np.round(ratio, 3).tolist()}")
            literal_misses += int(np.sum((ratio < 1.0) | (ratio > 1.25)))
            slope = np.polyfit(np.log([r.N_t for r in pts]), np.log([r.avgmse for r in pts]), 1)[0]
            if abs(slope + 1) > 0.05:
                problems.append(f"{prof} L_s={L_s} slope {slope:.3f}")
            notes.append(f"{prof}/L_s={L_s}: slope {slope:.3f}, ratio {ratio.min():.3f}..{ratio.max():.3f}")
        notes.append(f"{prof} {elapsed:.1f}s")
    detail = "; ".join(notes) + f"; {literal_misses}/24 points outside the literal [1.0, 1.25]"
    record(1, not problems, detail if not problems else "; ".join(problems))
    assert not problems, problems


# --------------------------------------------------------------------------
# 2. alpha identity
# --------------------------------------------------------------------------

def test_criterion_2_alpha_equals_rank():
    cfg = SystemConfig()
    prof = load_profile("EVA", cfg.T)
    x = gen_pilot_sequence("qpsk_random", 16, seed=1)
    A = effective_A(x, freq_corr(prof, 128, 8 * np.arange(16)))
    eva_dev = abs(bd.alpha_of(A) - 9)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(50):
        r = int(rng.integers(1, 17))
        g = rng.standard_normal((16, r)) + 1j * rng.standard_normal((16, r))
        M = g @ g.conj().T
        worst = max(worst, abs(bd.alpha_of(M, rank_tol=1e-10) - nk.numerical_rank(M)))
    ok = eva_dev <= 1e-6 and worst <= 1e-6
    record(2, ok, f"EVA |alpha-9| = {eva_dev:.2e}; random ranks max |alpha-rank| = {worst:.2e}")
    assert ok


# --------------------------------------------------------------------------
# 3. CRLB closed-form equivalence
# --------------------------------------------------------------------------

def test_criterion_3_crlb_closed_form():
    t0 = time.perf_counter()
    rows = ex.run_crlb_validation([ex.CrlbCase(2, 2, 2, 2), ex.CrlbCase(2, 1, 3, 2)])
    elapsed = time.perf_counter() - t0
    devs = [r.crlb_deviation_noiseless for r in rows]
    ok = max(devs) < 1e-6 and elapsed < 10
    record(3, ok, f"rel. Frobenius deviations {', '.join(f'{d:.1e}' for d in devs)} in {elapsed:.2f}s")
    assert ok


# --------------------------------------------------------------------------
# 4. Wishart statistics
# --------------------------------------------------------------------------

def test_criterion_4_wishart_moments():
    cfg = SystemConfig(n_T=1, n_R=1, sigma_n2=0.1, N_t=20)
    sp = SpatialCorrelation.identity(1, 1)
    prof = load_profile("EVA", cfg.T)
    pat = make_pattern(1, 8, 2, 128)
    x = gen_pilot_sequence("qpsk_random", 2, seed=1)
    pat = pat.with_sequence(x)
    A = effective_A(x, freq_corr(prof, 128, pat.tones[0]))
    omega = omega_of(x, doppler_corr(2, 8, cfg.f_d, cfg.T))
    S = build_sigma(cfg, sp, A, omega)
    trials = 10_000
    est = np.empty((trials, 4), dtype=complex)
    for t in range(trials):
        v = sample_channel_matrices(cfg, sp, pat, prof, "iid", seed=t, as_vectors=True)
        est[t] = nk.vec(sample_autocorrelation(v, vectors=True).sigma_hat)
    mu = nk.vec(S)
    mean_se = est.std(axis=0, ddof=1) / math.sqrt(trials)
    z_mean = np.abs(est.mean(0) - mu) / mean_se
    d = est - mu
    prods = d[:, :, None] * d[:, None, :].conj()
    emp = prods.mean(0)
    pred = np.kron(S.T, S) / cfg.N_t
    z_re = np.abs(emp.real - pred.real) / (prods.real.std(0, ddof=1) / math.sqrt(trials))
    # diagonal products d d^* are real by construction; compare imaginary parts off the diagonal
    off = ~np.eye(4, dtype=bool)
    im_se = prods.imag.std(0, ddof=1)[off] / math.sqrt(trials)
    z_im = np.abs(emp.imag - pred.imag)[off] / im_se
    ok = z_mean.max() <= 3 and max(z_re.max(), z_im.max()) <= 5
    record(4, ok, f"{trials} trials: mean max {z_mean.max():.2f} sigma (<=3), "
                  f"covariance max {max(z_re.max(), z_im.max()):.2f} sigma (<=5)")
    assert ok


# --------------------------------------------------------------------------
# 5. finite-SNR ordering
# --------------------------------------------------------------------------

def test_criterion_5_finite_snr_bound_ordering():
    cfg = ExperimentConfig(trials=20, pilot=replace(ExperimentConfig().pilot, kind="omega_eigvec"),
                           sweep=Sweep(N_t=[300, 1000], snr_db=[0.0, 10.0, 20.0], f_d=[40.0, 80.0, 120.0],
                                       profiles=["EVA", "ETU"]))
    t0 = time.perf_counter()
    rows = ex.run_fig2(cfg)
    elapsed = time.perf_counter() - t0
    z = [(r.avgmse - r.avgmse_lb_finite) / r.avgmse_se for r in rows]
    below = [r for r in rows if r.avgmse < r.avgmse_lb_finite - 2 * r.avgmse_se]
    mono = True
    for prof in ("EVA", "ETU"):
        for f_d in (40.0, 80.0, 120.0):
            for n in (300, 1000):
                b = [r.avgmse_lb_finite for r in sorted(rows, key=lambda r: r.snr_db)
                     if r.profile == prof and r.f_d == f_d and r.N_t == n]
                mono &= all(x > y for x, y in zip(b, b[1:]))
    ok = not below and mono and elapsed < 600
    record(5, ok, f"{len(rows)} points, min (avgmse - bound)/SE = {min(z):.2f} (>= -2), "
                  f"bound strictly decreasing in SNR: {mono}, {elapsed:.0f}s")
    assert ok


# --------------------------------------------------------------------------
# 6. largest Doppler eigenvalue approximation
# --------------------------------------------------------------------------

LAMBDA_GRID = [round(0.02 + 0.03 * i, 2) for i in range(12)]
T_S = 144 * 800e-9


def lambda_max_errors():
    out = {}
    for P in (8, 16, 32):
        for x in LAMBDA_GRID:
            f_d = x / (8 * T_S)
            exact = np.linalg.eigvalsh(bd.omega_span_matrix(P, 8, f_d, T_S))[-1]
            out[(P, x)] = abs(bd.lambda_max_approx(P, 8, f_d, T_S) - exact) / exact
    return out


@pytest.mark.xfail(strict=True, reason="the Bessel approximation error reaches 3.57% at 0.35; "
                                       "the 2% tolerance holds only up to about 0.23")
def test_criterion_6_lambda_max_approximation():
    errs = lambda_max_errors()
    (P, x), worst = max(errs.items(), key=lambda kv: kv[1])
    ok_until = max(x for x in LAMBDA_GRID if all(errs[(p, y)] <= 0.02 for p in (8, 16, 32) for y in LAMBDA_GRID
                                                  if y <= x))
    ok = worst <= 0.02
    record(6, ok, f"max rel. error {100 * worst:.2f}% at P={P}, theta f_d T_s={x} (tolerance 2%); "
                  f"within 2% up to {ok_until}")
    assert ok


def test_lambda_max_error_frozen():
    # eigendecomposition oracle values, frozen as a regression pin
    errs = lambda_max_errors()
    assert errs[(32, 0.35)] == pytest.approx(0.03573, abs=5e-5)
    assert errs[(8, 0.02)] == pytest.approx(0.00016, abs=5e-5)
    assert max(errs[(p, x)] for p in (8, 16, 32) for x in LAMBDA_GRID if x <= 0.23) < 0.02


# --------------------------------------------------------------------------
# 7. numerics
# --------------------------------------------------------------------------

def j0_power_series(x):
    with mpmath.workdps(60):
        x = mpmath.mpf(x)
        term, total, k = mpmath.mpf(1), mpmath.mpf(1), 0
        while abs(term) > mpmath.mpf(10) ** -40:
            k += 1
            term *= -(x / 2) ** 2 / (k * k)
            total += term
        return float(total)


def test_criterion_7_numerics():
    xs = np.linspace(0, 20, 401)
    j0_err = max(abs(nk.bessel_j0(x) - j0_power_series(x)) for x in xs)
    rng = np.random.default_rng(77)
    pen = 0.0
    for m, n, r in [(1, 1, 1), (7, 5, 5), (16, 16, 9), (33, 48, 20), (64, 64, 64), (64, 50, 30)]:
        a = (rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))) @ \
            (rng.standard_normal((r, n)) + 1j * rng.standard_normal((r, n)))
        a /= np.linalg.norm(a, 2)
        u, s, v = nk.svd(a)
        pen = max(pen, np.linalg.norm((u[:, :s.size] * s) @ v[:, :s.size].conj().T - a))
        ap = nk.pinv(a)
        pen = max(pen, np.linalg.norm(a @ ap @ a - a), np.linalg.norm(ap @ a @ ap - ap),
                  np.linalg.norm((a @ ap).conj().T - a @ ap), np.linalg.norm((ap @ a).conj().T - ap @ a))
    kron_exact = True
    for nrt in range(1, 5):
        for p in range(1, 5):
            X = rng.integers(-4, 5, (nrt, nrt)) + 1j * rng.integers(-4, 5, (nrt, nrt))
            Y = rng.integers(-4, 5, (p, p)) + 1j * rng.integers(-4, 5, (p, p))
            kron_exact &= np.array_equal(nk.k_otimes(nrt, p) @ np.kron(nk.vec(X), nk.vec(Y)),
                                         nk.vec(np.kron(X, Y)))
    ok = j0_err < 1e-10 and pen < 1e-9 and kron_exact
    record(7, ok, f"J0 max err {j0_err:.1e} on [0, 20]; SVD/Penrose max residual {pen:.1e}; "
                  f"K_otimes identity exact: {kron_exact}")
    assert ok


# --------------------------------------------------------------------------
# 8. determinism
# --------------------------------------------------------------------------

def test_criterion_8_determinism_across_workers(tmp_path):
    cfg = ExperimentConfig(trials=4, master_seed=99,
                           sweep=Sweep(N_t=[100, 300], L_s=[1, "rank"], profiles=["EVA", "ETU"],
                                       snr_db=[10.0], f_d=[80.0]))
    blobs = {}
    for w in (1, 4, 8):
        for run in range(2):
            c = replace(cfg, workers=w)
            p1 = emit(ex.run_fig1(c), "csv", tmp_path / f"f1_{w}_{run}.csv", columns=ex.RESULT_COLUMNS)
            p2 = emit(ex.run_fig2(c), "csv", tmp_path / f"f2_{w}_{run}.csv", columns=ex.RESULT_COLUMNS)
            blobs[(w, run)] = p1.read_bytes() + p2.read_bytes()
    ok = len(set(blobs.values())) == 1
    record(8, ok, f"{len(blobs)} runs (workers 1/4/8, twice each), identical bytes: {ok}")
    assert ok
