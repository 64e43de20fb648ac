"""Monte-Carlo orchestration for the noiseless and finite-SNR sweeps and the CRLB cross-check."""

from __future__ import annotations

import hashlib
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import bounds as bd
from . import numkernel as nk
from .channel import (PowerDelayProfile, SpatialCorrelation, SystemConfig, doppler_corr, freq_corr,
                      freq_cross_corr, load_profile, sample_channel_matrices)
from .config import ExperimentConfig
from .errors import ConfigError, InvalidArgumentError
from .estimator import CHANNEL_RANK_TOL, avg_mse, mle_spatial, sample_autocorrelation, significant_order
from .pilots import effective_A, gen_pilot_sequence, make_pattern, omega_of


@dataclass
class ResultRow:
    profile: str
    N_t: int
    snr_db: float
    f_d: float
    L: int
    L_s: int
    trials: int
    avgmse: float
    avgmse_se: float
    avgmse_lb_asymptotic: float
    avgmse_lb_finite: float
    beta: float
    beta_max: float
    omega: float


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def sub_seed(master_seed: int, *coords) -> int:
    """64-bit seed hashed from the master seed and grid coordinates."""
    text = "|".join([str(int(master_seed))] + [repr(c) for c in coords])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


@dataclass
class _PointSetup:
    """Everything a trial needs besides its seed (cheap to pickle)."""

    system: SystemConfig
    spatial: SpatialCorrelation
    pattern: object
    profile: PowerDelayProfile
    A: np.ndarray
    omega: float
    mode: str
    cross: str
    cross_A: dict | None


def _trial(setup: _PointSetup, N_t: int, seed: int, L_s_list) -> list[float]:
    cfg = replace(setup.system, N_t=int(N_t))
    v = sample_channel_matrices(cfg, setup.spatial, setup.pattern, setup.profile, setup.mode, seed,
                                cross=setup.cross, as_vectors=True)
    sc = sample_autocorrelation(v, vectors=True)
    truth = setup.spatial.xi_s()
    out = []
    for L_s in L_s_list:
        res = mle_spatial(sc, setup.A, setup.omega, cfg.sigma_n2, L_s, n_R=cfg.n_R,
                          cross_A=setup.cross_A)
        out.append(avg_mse(res.xi_hat, truth))
    return out


def _run_task(task):
    setup, N_t, seed, L_s_list = task
    return _trial(setup, N_t, seed, L_s_list)


def _map(tasks, workers: int):
    """Evaluate tasks in order, in-process or on a process pool."""
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _setup(cfg: ExperimentConfig, system: SystemConfig, profile_name: str, kind: str) -> _PointSetup:
    profile = cfg.profile(profile_name)
    pat = make_pattern(system.n_T, cfg.pilot.theta, cfg.pilot.P, system.N)
    om = doppler_corr(pat.P, pat.theta, system.f_d, system.T)
    x = gen_pilot_sequence(kind, pat.P, omega_matrix=om, seed=cfg.pilot.seed)
    pat = pat.with_sequence(x)
    A = effective_A(x, freq_corr(profile, system.N, pat.tones[0]))
    cross_A = None
    if cfg.cross == "exact":
        cross_A = {off: effective_A(x, freq_cross_corr(profile, system.N, pat.tones[0], off))
                   for off in range(-(system.n_T - 1), system.n_T)}
    return _PointSetup(system, cfg.spatial_correlation(), pat, profile, A, omega_of(x, om),
                       cfg.mode, cfg.cross, cross_A)


def _resolve_L_s(entries, rank: int) -> list[int]:
    out = []
    for e in entries:
        ls = rank if e == "rank" else int(e)
        if ls > rank:
            raise ConfigError(f"L_s={ls} exceeds the rank {rank} of the frequency correlation")
        if ls not in out:
            out.append(ls)
    return out


def run_fig1(cfg: ExperimentConfig) -> list[ResultRow]:
    """Noiseless sweep over ``N_t`` and ``L_s`` against ``1 / (L_s N_t)``.

    Noise is forced to zero; ``snr_db`` is reported as ``inf``.
    """
    cfg.validate()
    system = replace(cfg.system, sigma_n2=0.0, snr_db=None)
    kind = cfg.pilot.kind or "qpsk_random"
    rows = []
    for name in cfg.sweep.profiles:
        setup = _setup(cfg, system, name, kind)
        rank = nk.numerical_rank(setup.A, CHANNEL_RANK_TOL)
        L_s_list = _resolve_L_s(cfg.sweep.L_s, rank)
        tasks = [(setup, int(n), sub_seed(cfg.master_seed, "fig1", str(name), int(n), t), L_s_list)
                 for n in cfg.sweep.N_t for t in range(cfg.trials)]
        results = _map(tasks, cfg.workers)
        for i, n in enumerate(cfg.sweep.N_t):
            block = np.array(results[i * cfg.trials:(i + 1) * cfg.trials])
            for j, L_s in enumerate(L_s_list):
                mean, se = _mean_se(block[:, j])
                rows.append(ResultRow(
                    profile=str(name), N_t=int(n), snr_db=math.inf, f_d=float(system.f_d), L=rank,
                    L_s=L_s, trials=cfg.trials, avgmse=mean, avgmse_se=se,
                    avgmse_lb_asymptotic=bd.avgmse_lb_asymptotic(L_s, int(n)),
                    avgmse_lb_finite=bd.avgmse_lb_asymptotic(L_s, int(n)),
                    beta=float(rank), beta_max=float(rank), omega=setup.omega))
    return rows


def run_fig2(cfg: ExperimentConfig) -> list[ResultRow]:
    """Finite-SNR sweep over ``N_t x snr_db x f_d`` against ``1 / (beta_max N_t)``.

    ``L_s`` at each point is the number of eigenvalues whose effective SNR
    clears ``cfg.threshold_db``.
    """
    cfg.validate()
    if any(math.isinf(s) for s in cfg.sweep.snr_db):
        raise ConfigError("run_fig2 needs finite snr_db values")
    kind = cfg.pilot.kind or "omega_eigvec"
    rows = []
    tasks = []
    points = []
    for name in cfg.sweep.profiles:
        for f_d in cfg.sweep.f_d:
            for snr in cfg.sweep.snr_db:
                system = replace(cfg.system, f_d=float(f_d), snr_db=float(snr), sigma_n2=None)
                setup = _setup(cfg, system, name, kind)
                rank = nk.numerical_rank(setup.A, CHANNEL_RANK_TOL)
                L_s, _ = significant_order(setup.A, setup.omega, system.sigma_n2, cfg.threshold_db)
                L_s = max(L_s, 1)
                lam = np.sort(np.linalg.eigvalsh(0.5 * (setup.A + setup.A.conj().T)))[::-1]
                beta = bd.beta_of(setup.A, setup.omega, system.sigma_n2)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", bd.PreconditionWarning)
                    bmax = bd.beta_max_of(setup.A.shape[0], cfg.pilot.theta, float(f_d), system.T_s,
                                          lam, system.sigma_n2)
                for n in cfg.sweep.N_t:
                    points.append((name, f_d, snr, int(n), rank, L_s, beta, bmax, setup.omega))
                    for t in range(cfg.trials):
                        seed = sub_seed(cfg.master_seed, "fig2", str(name), float(f_d), float(snr), int(n), t)
                        tasks.append((setup, int(n), seed, [L_s]))
    results = _map(tasks, cfg.workers)
    for i, (name, f_d, snr, n, rank, L_s, beta, bmax, omega) in enumerate(points):
        mean, se = _mean_se([r[0] for r in results[i * cfg.trials:(i + 1) * cfg.trials]])
        rows.append(ResultRow(
            profile=str(name), N_t=n, snr_db=float(snr), f_d=float(f_d), L=rank, L_s=L_s,
            trials=cfg.trials, avgmse=mean, avgmse_se=se,
            avgmse_lb_asymptotic=bd.avgmse_lb_asymptotic(rank, n),
            avgmse_lb_finite=bd.avgmse_lb_finite(bmax, n),
            beta=beta, beta_max=bmax, omega=omega))
    return rows


# --------------------------------------------------------------------------
# CRLB cross-validation
# --------------------------------------------------------------------------

@dataclass
class CrlbCase:
    n_T: int
    n_R: int
    P: int
    L: int
    N_t: int = 100
    sigma_n2: float = 0.1
    seed: int = 0

    @property
    def label(self) -> str:
        return f"nT{self.n_T}_nR{self.n_R}_P{self.P}_L{self.L}"


@dataclass
class CrlbRow:
    config: str
    n_T: int
    n_R: int
    P: int
    L: int
    N_t: int
    alpha: float
    alpha_deviation: float
    crlb_deviation_noiseless: float
    crlb_deviation_finite_snr: float
    finite_snr_coefficient: float
    beta: float
    beta_deviation: float


CRLB_COLUMNS = [f.name for f in fields(CrlbRow)]

DEFAULT_CRLB_CASES = [
    CrlbCase(1, 1, 1, 1),
    CrlbCase(2, 2, 2, 2),
    CrlbCase(2, 1, 3, 2),
    CrlbCase(1, 2, 4, 3),
    CrlbCase(2, 2, 4, 4),
]


def random_correlation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian positive definite matrix with unit diagonal."""
    g = rng.standard_normal((n, 2 * n)) + 1j * rng.standard_normal((n, 2 * n))
    c = g @ g.conj().T
    d = 1.0 / np.sqrt(np.real(np.diag(c)))
    c = c * d[:, None] * d[None, :]
    return 0.5 * (c + c.conj().T)


def _rel_fro(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def crlb_case_inputs(case: CrlbCase):
    """Spatial matrix, ``A`` and ``omega`` for one small validation config.

    ``A`` is built from ``L`` equal-power taps at non-integer delays over
    ``P`` unit-modulus pilots, so its rank is ``min(L, P)``.
    """
    if case.n_T * case.n_R * case.P > bd.GENERIC_MAX_DIM:
        raise InvalidArgumentError(f"{case.label}: n_T n_R P exceeds {bd.GENERIC_MAX_DIM}")
    rng = np.random.default_rng(case.seed)
    xi = np.kron(random_correlation(case.n_T, rng), random_correlation(case.n_R, rng))
    delays = np.sort(rng.uniform(0.0, 6.0, case.L))
    profile = PowerDelayProfile(delays, np.full(case.L, 1.0 / case.L))
    N = 4 * case.P
    tones = 2 * np.arange(case.P)
    x = np.exp(2j * np.pi * rng.integers(0, 4, case.P) / 4)
    A = effective_A(x, freq_corr(profile, N, tones))
    omega = float(case.P)
    return xi, A, omega


def run_crlb_validation(cases=None) -> list[CrlbRow]:
    """Generic Fisher-matrix CRLB against the closed forms for small configs."""
    cases = DEFAULT_CRLB_CASES if cases is None else cases
    rows = []
    for case in cases:
        xi, A, omega = crlb_case_inputs(case)
        rank = nk.numerical_rank(A, nk.DEFAULT_RANK_TOL)
        alpha = bd.alpha_of(A, rank_tol=nk.DEFAULT_RANK_TOL)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", bd.RankDeficientWarning)
            J0 = bd.fisher_information(xi, A, omega, 0.0, case.N_t, pseudo_inverse=True,
                                       method="generic")
            c0 = bd.crlb(J0)
        dev0 = _rel_fro(c0, bd.crlb_closed_form(xi, rank, case.N_t))
        J1 = bd.fisher_information(xi, A, omega, case.sigma_n2, case.N_t, model="kron",
                                   method="generic")
        c1 = bd.crlb(J1)
        coef = bd.finite_snr_coefficient(A, omega, case.sigma_n2)
        dev1 = _rel_fro(c1, bd.crlb_closed_form(xi, coef, case.N_t))
        beta = bd.beta_of(A, omega, case.sigma_n2, rank_tol=nk.DEFAULT_RANK_TOL)
        rows.append(CrlbRow(
            config=case.label, n_T=case.n_T, n_R=case.n_R, P=case.P, L=case.L, N_t=case.N_t,
            alpha=alpha, alpha_deviation=abs(alpha - rank),
            crlb_deviation_noiseless=dev0, crlb_deviation_finite_snr=dev1,
            finite_snr_coefficient=coef, beta=beta, beta_deviation=abs(beta - coef)))
    return rows


def rows_as_dicts(rows) -> list[dict]:
    return [asdict(r) for r in rows]


def bounds_for_config(cfg: ExperimentConfig, profile_name: str | None = None,
                      *, with_crlb: bool = False) -> bd.BoundsReport:
    """Bounds of the first configured profile (or ``profile_name``) without simulation."""
    cfg.validate()
    name = profile_name or cfg.sweep.profiles[0]
    profile = cfg.profile(name)
    pat = make_pattern(cfg.system.n_T, cfg.pilot.theta, cfg.pilot.P, cfg.system.N)
    om = doppler_corr(pat.P, pat.theta, cfg.system.f_d, cfg.system.T)
    kind = cfg.pilot.kind or ("qpsk_random" if cfg.system.sigma_n2 == 0 else "omega_eigvec")
    pat = pat.with_sequence(gen_pilot_sequence(kind, pat.P, omega_matrix=om, seed=cfg.pilot.seed))
    return bd.compute_bounds(cfg.system, profile, cfg.spatial_correlation(), pat,
                             threshold_db=cfg.threshold_db, with_crlb=with_crlb)


__all__ = [
    "ResultRow", "RESULT_COLUMNS", "CrlbCase", "CrlbRow", "CRLB_COLUMNS", "DEFAULT_CRLB_CASES",
    "sub_seed", "run_fig1", "run_fig2", "run_crlb_validation", "crlb_case_inputs",
    "random_correlation", "rows_as_dicts", "bounds_for_config", "load_profile",
]
