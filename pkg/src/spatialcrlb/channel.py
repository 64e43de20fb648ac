"""Correlation structures and random realizations of the doubly selective channel.

Builds the frequency correlation on pilot tones, the Doppler (time)
correlation across pilot samples, the full covariance of the stacked LS
estimates, and draws LS-estimate matrices either i.i.d. from that
covariance or from a time-correlated sum-of-sinusoids channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numkernel as nk
from .errors import InvalidArgumentError

#: 3GPP E-UTRA extended profiles: (excess delays in ns, relative powers in dB).
PROFILE_PRESETS = {
    "EVA": ([0, 30, 150, 310, 370, 710, 1090, 1730, 2510],
            [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9]),
    "ETU": ([0, 50, 120, 200, 230, 500, 1600, 2300, 5000],
            [-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0]),
}

#: Transmit and receive correlation matrices of the 4x4 reference setup.
REFERENCE_XI_T = np.array([
    [1, -0.13 - 0.62j, -0.49 + 0.23j, 0.15 + 0.28j],
    [-0.13 + 0.62j, 1, -0.13 - 0.52j, -0.38 + 0.12j],
    [-0.49 - 0.23j, -0.13 + 0.52j, 1, 0.02 - 0.61j],
    [0.15 - 0.28j, -0.38 - 0.12j, 0.02 + 0.61j, 1],
], dtype=complex)

REFERENCE_XI_R = np.array([
    [1, -0.45 + 0.53j, 0.37 - 0.22j, 0.19 + 0.21j],
    [-0.45 - 0.53j, 1, -0.35 - 0.02j, 0.02 - 0.27j],
    [0.37 + 0.22j, -0.35 + 0.02j, 1, -0.10 + 0.54j],
    [0.19 - 0.21j, 0.02 + 0.27j, -0.10 - 0.54j, 1],
], dtype=complex)

#: Sinusoids per tap in the time-correlated generator.
N_SINUSOIDS = 32

# samples drawn from one random stream before moving to the next sub-seed
_BLOCK = 256


@dataclass(frozen=True)
class PowerDelayProfile:
    """Tap delays normalized by the sampling period, and linear tap powers summing to one."""

    delays: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        p = np.asarray(self.powers, dtype=float)
        if d.ndim != 1 or d.size < 1 or d.shape != p.shape:
            raise InvalidArgumentError("delays and powers must be equal-length non-empty lists")
        if d[0] < 0 or np.any(np.diff(d) <= 0):
            raise InvalidArgumentError("delays must be non-negative and strictly increasing")
        if np.any(p <= 0):
            raise InvalidArgumentError("tap powers must be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError(f"tap powers sum to {p.sum()!r}, expected 1")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "powers", p)

    @property
    def L(self) -> int:
        return int(self.delays.size)


def load_profile(name=None, T: float = 800e-9, *, delays_s=None, powers_db=None) -> PowerDelayProfile:
    """Load a preset (``"EVA"``/``"ETU"``) or a custom profile.

    Custom profiles give ``delays_s`` in seconds and ``powers_db`` in dB.
    Delays are divided by the sampling period ``T`` and powers are
    converted to linear scale and normalized to unit sum.
    """
    if T <= 0:
        raise InvalidArgumentError("sampling period T must be positive")
    if name is not None:
        key = str(name).upper()
        if key not in PROFILE_PRESETS:
            raise InvalidArgumentError(f"unknown profile preset {name!r}; choose from {sorted(PROFILE_PRESETS)}")
        ns, db = PROFILE_PRESETS[key]
        delays_s = np.asarray(ns, dtype=float) * 1e-9
        powers_db = db
    if delays_s is None or powers_db is None:
        raise InvalidArgumentError("give a preset name or both delays_s and powers_db")
    delays_s = np.asarray(delays_s, dtype=float)
    powers_db = np.asarray(powers_db, dtype=float)
    if delays_s.shape != powers_db.shape or delays_s.ndim != 1 or delays_s.size == 0:
        raise InvalidArgumentError("delays and powers must be equal-length non-empty lists")
    if not np.all(np.isfinite(powers_db)):
        raise InvalidArgumentError("tap powers must be positive (finite in dB)")
    lin = 10.0 ** (powers_db / 10.0)
    return PowerDelayProfile(delays_s / T, lin / lin.sum())


@dataclass
class SystemConfig:
    """OFDM/MIMO system parameters.

    Exactly one of ``sigma_n2`` and ``snr_db`` needs to be given; the other
    is derived with SNR = 1 / sigma_n2 (unit channel power, unit-modulus
    pilots).
    """

    N: int = 128
    L_cp: int = 16
    T: float = 800e-9
    f_d: float = 100.0
    n_T: int = 4
    n_R: int = 4
    sigma_n2: float | None = None
    snr_db: float | None = None
    N_t: int = 1000
    symbol_gap: int | None = None

    def __post_init__(self):
        if self.sigma_n2 is None and self.snr_db is None:
            self.sigma_n2 = 0.0
        if self.sigma_n2 is None:
            self.sigma_n2 = 10.0 ** (-float(self.snr_db) / 10.0)
        elif self.snr_db is None:
            self.snr_db = math.inf if self.sigma_n2 == 0 else -10.0 * math.log10(self.sigma_n2)
        else:
            derived = 10.0 ** (-float(self.snr_db) / 10.0)
            if not math.isclose(derived, self.sigma_n2, rel_tol=1e-9, abs_tol=0.0):
                raise InvalidArgumentError(
                    f"sigma_n2={self.sigma_n2} and snr_db={self.snr_db} disagree")
        problems = []
        if self.N < 1:
            problems.append("N >= 1")
        if self.L_cp < 0:
            problems.append("L_cp >= 0")
        if not self.T > 0:
            problems.append("T > 0")
        if self.f_d < 0:
            problems.append("f_d >= 0")
        if self.n_T < 1 or self.n_R < 1:
            problems.append("n_T, n_R >= 1")
        if self.sigma_n2 < 0:
            problems.append("sigma_n2 >= 0")
        if self.N_t < 1:
            problems.append("N_t >= 1")
        if self.symbol_gap is not None and self.symbol_gap < 1:
            problems.append("symbol_gap >= 1")
        if problems:
            raise InvalidArgumentError("invalid system config, need: " + ", ".join(problems))

    @property
    def T_s(self) -> float:
        """OFDM symbol duration including the cyclic prefix."""
        return (self.N + self.L_cp) * self.T

    @property
    def n_pairs(self) -> int:
        return self.n_T * self.n_R

    def resolved_symbol_gap(self) -> int:
        """Symbols between consecutive pilot samples in time-correlated mode.

        Defaults to the smallest gap whose Doppler correlation magnitude
        drops below 0.05 (1 when there is no Doppler).
        """
        if self.symbol_gap is not None:
            return int(self.symbol_gap)
        if self.f_d == 0:
            return 1
        gap = 1
        while abs(nk.bessel_j0(2 * math.pi * self.f_d * gap * self.T_s)) >= 0.05:
            gap += 1
            if gap > 10**6:
                raise InvalidArgumentError("no symbol gap decorrelates this Doppler spread")
        return gap


@dataclass
class SpatialCorrelation:
    xi_t: np.ndarray
    xi_r: np.ndarray
    _xi_s: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.xi_t = np.asarray(self.xi_t, dtype=complex)
        self.xi_r = np.asarray(self.xi_r, dtype=complex)
        for name, m in (("xi_t", self.xi_t), ("xi_r", self.xi_r)):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InvalidArgumentError(f"{name} must be square")
            if not nk.is_psd(m, 1e-10):
                raise InvalidArgumentError(f"{name} must be Hermitian positive semidefinite")
            if np.max(np.abs(np.diag(m) - 1.0)) > 1e-10:
                raise InvalidArgumentError(f"{name} must have unit diagonal")

    @classmethod
    def paper_4x4(cls) -> "SpatialCorrelation":
        return cls(REFERENCE_XI_T.copy(), REFERENCE_XI_R.copy())

    @classmethod
    def identity(cls, n_T: int, n_R: int) -> "SpatialCorrelation":
        return cls(np.eye(n_T), np.eye(n_R))

    @property
    def n_T(self) -> int:
        return self.xi_t.shape[0]

    @property
    def n_R(self) -> int:
        return self.xi_r.shape[0]

    def xi_s(self) -> np.ndarray:
        if self._xi_s is None:
            self._xi_s = nk.kron(self.xi_t, self.xi_r)
        return self._xi_s


# --------------------------------------------------------------------------
# deterministic builders
# --------------------------------------------------------------------------

def fourier_delay_matrix(N: int, profile: PowerDelayProfile, tone_indices) -> np.ndarray:
    """Rows ``exp(-j 2 pi k tau_l / N)`` for each requested tone ``k``."""
    k = np.asarray(tone_indices, dtype=float).reshape(-1)
    if np.any(k < 0) or np.any(k >= N) or np.any(k != np.round(k)):
        raise InvalidArgumentError(f"tone indices must be integers in [0, {N})")
    return np.exp(-2j * np.pi * np.outer(k, profile.delays) / N)


def phase_twist(N: int, profile: PowerDelayProfile, shift: int = 1) -> np.ndarray:
    """Diagonal of the per-tone phase twist raised to ``shift``."""
    return np.exp(-2j * np.pi * shift * profile.delays / N)


def freq_corr(profile: PowerDelayProfile, N: int, pilot_tones) -> np.ndarray:
    """Frequency correlation ``F D F^H`` restricted to ``pilot_tones``."""
    f = fourier_delay_matrix(N, profile, pilot_tones)
    r = (f * profile.powers) @ f.conj().T
    return 0.5 * (r + r.conj().T)


def freq_cross_corr(profile: PowerDelayProfile, N: int, pilot_tones, shift: int) -> np.ndarray:
    """Exact cross-correlation between pilot sets offset by ``shift`` antennas.

    ``F0 Phi^shift D F0^H`` where ``F0`` are the rows of ``pilot_tones``.
    With ``shift = 0`` this equals :func:`freq_corr`.
    """
    f = fourier_delay_matrix(N, profile, pilot_tones)
    tw = phase_twist(N, profile, shift)
    return (f * (tw * profile.powers)) @ f.conj().T


def doppler_corr(P: int, theta: int, f_d: float, T_spacing: float) -> np.ndarray:
    """Symmetric Toeplitz matrix ``J0(2 pi f_d (k1 - k2) theta T_spacing)``."""
    if P < 1 or theta < 1 or f_d < 0:
        raise InvalidArgumentError("doppler_corr needs P >= 1, theta >= 1, f_d >= 0")
    lags = np.arange(P)
    first = nk.bessel_j0(2 * np.pi * f_d * lags * theta * T_spacing)
    first = np.atleast_1d(first)
    idx = np.abs(lags[:, None] - lags[None, :])
    return first[idx]


def build_sigma(cfg: SystemConfig, spatial: SpatialCorrelation, A, omega: float,
                cross_A=None) -> np.ndarray:
    """Covariance of the stacked LS estimate, ``kron(Xi_s, omega A) + sigma_n2 I``.

    ``cross_A`` optionally maps a transmit-antenna offset ``i1 - i2`` to its
    exact cross term; block ``(k1, k2)`` then uses ``cross_A[i1 - i2]``
    instead of ``A``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError("A must be square")
    if not omega > 0:
        raise InvalidArgumentError("omega must be positive")
    if (spatial.n_T, spatial.n_R) != (cfg.n_T, cfg.n_R):
        raise InvalidArgumentError("spatial correlation dimensions do not match the system config")
    P = A.shape[0]
    xi = spatial.xi_s()
    d = xi.shape[0]
    if cross_A is None:
        sigma = nk.kron(xi, omega * A)
    else:
        sigma = np.empty((d * P, d * P), dtype=complex)
        for k1 in range(d):
            for k2 in range(d):
                blk = cross_A[k1 // cfg.n_R - k2 // cfg.n_R]
                sigma[k1 * P:(k1 + 1) * P, k2 * P:(k2 + 1) * P] = xi[k1, k2] * omega * blk
    if cfg.sigma_n2:
        sigma = sigma + cfg.sigma_n2 * np.eye(d * P)
    return sigma


# --------------------------------------------------------------------------
# random generation
# --------------------------------------------------------------------------

def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circular complex Gaussian draws."""
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def _blocks(n_total: int):
    for b, start in enumerate(range(0, n_total, _BLOCK)):
        yield b, start, min(n_total, start + _BLOCK)


def vectors_to_matrices(vectors: np.ndarray, P: int, n_R: int, n_T: int) -> np.ndarray:
    """Reshape stacked covariance-ordered vectors into ``(N_t, P n_R, n_T)`` matrices."""
    return vectors.reshape(vectors.shape[0], n_T, n_R * P).transpose(0, 2, 1)


def matrices_to_vectors(mats: np.ndarray) -> np.ndarray:
    """Column-major ``vec`` of each matrix in a ``(N_t, rows, cols)`` stack."""
    mats = np.asarray(mats)
    return mats.transpose(0, 2, 1).reshape(mats.shape[0], -1)


def _pair_factors(cfg, pattern, profile, cross):
    """Per transmit antenna ``i``: ``X_p^H F^(i) D^(1/2)`` (P x L)."""
    xh = np.conj(pattern.x_p)
    sq = np.sqrt(profile.powers)
    out = []
    for i in range(cfg.n_T):
        tones = pattern.tones[0] if cross == "approx" else pattern.tones[i]
        f = fourier_delay_matrix(cfg.N, profile, tones)
        out.append((xh[:, None] * f) * sq)
    return out


def sample_channel_matrices(cfg: SystemConfig, spatial: SpatialCorrelation, pattern,
                            profile: PowerDelayProfile, mode: str = "iid", seed: int = 0,
                            *, cross: str = "approx", N_t: int | None = None,
                            as_vectors: bool = False) -> np.ndarray:
    """Draw ``N_t`` complete LS-estimate matrices, each ``(P n_R) x n_T``.

    Parameters
    ----------
    mode : {"iid", "timeseries"}
        ``"iid"`` draws every stacked vector independently from
        ``CN(0, Sigma)`` with ``Sigma`` as in :func:`build_sigma`.
        ``"timeseries"`` runs a sum-of-sinusoids Jakes channel per tap and
        antenna pair, samples it at the pilot instants of consecutive
        pilot symbols ``symbol_gap`` symbols apart, and forms LS
        estimates from noisy pilot observations.
    cross : {"approx", "exact"}
        Whether pilot sets of different transmit antennas share one
        frequency correlation (``"approx"``) or keep their exact
        phase-twisted cross terms.
    as_vectors : bool
        Return the stacked vectors ``(N_t, n_T n_R P)`` instead of matrices.

    Sample ``n`` depends only on ``(seed, n)``, so splitting a run into
    chunks of 256 samples reproduces it exactly.
    """
    if mode not in ("iid", "timeseries"):
        raise InvalidArgumentError(f"mode must be 'iid' or 'timeseries', got {mode!r}")
    if cross not in ("approx", "exact"):
        raise InvalidArgumentError(f"cross must be 'approx' or 'exact', got {cross!r}")
    if (spatial.n_T, spatial.n_R) != (cfg.n_T, cfg.n_R) or pattern.n_T != cfg.n_T:
        raise InvalidArgumentError("spatial/pilot dimensions do not match the system config")
    if pattern.x_p is None:
        raise InvalidArgumentError("pilot pattern has no pilot sequence")
    n_t = cfg.N_t if N_t is None else int(N_t)
    if mode == "iid":
        vecs = _sample_iid(cfg, spatial, pattern, profile, seed, n_t, cross)
    else:
        vecs = _sample_timeseries(cfg, spatial, pattern, profile, seed, n_t, cross)
    if as_vectors:
        return vecs
    return vectors_to_matrices(vecs, pattern.P, cfg.n_R, cfg.n_T)


def _sample_iid(cfg, spatial, pattern, profile, seed, n_t, cross):
    from .pilots import omega_of

    P, L, d = pattern.P, profile.L, cfg.n_pairs
    omega = omega_of(pattern.x_p, doppler_corr(P, pattern.theta, cfg.f_d, cfg.T))
    s_xi = nk.psd_sqrt(spatial.xi_s())
    factors = _pair_factors(cfg, pattern, profile, cross)
    # G_k = sqrt(omega) X^H F^(i(k)) D^(1/2); sample_k = G_k (S_xi kron I_L) z
    g = np.stack([factors[k // cfg.n_R] for k in range(d)]) * math.sqrt(omega)
    out = np.empty((n_t, d * P), dtype=complex)
    sn = math.sqrt(cfg.sigma_n2)
    for b, lo, hi in _blocks(n_t):
        rng = _stream(seed, 0, b)
        z = _cn(rng, (hi - lo, d, L))
        w = np.einsum("ab,nbl->nal", s_xi, z)
        h = np.einsum("apl,nal->nap", g, w)
        if sn:
            h = h + sn * _cn(rng, (hi - lo, d, P))
        out[lo:hi] = h.reshape(hi - lo, d * P)
    return out


def jakes_process(times: np.ndarray, f_d: float, rng: np.random.Generator, n_proc: int,
                  n_sin: int = N_SINUSOIDS) -> np.ndarray:
    """Unit-power sum-of-sinusoids fading processes sampled at ``times``.

    Each process uses its own random arrival angles and phases, so the
    ensemble autocorrelation is ``J0(2 pi f_d tau)``. Returns an array of
    shape ``(n_proc, len(times))``.
    """
    alpha = rng.uniform(0.0, 2 * np.pi, (n_proc, n_sin))
    phi = rng.uniform(0.0, 2 * np.pi, (n_proc, n_sin))
    dop = 2 * np.pi * f_d * np.cos(alpha)
    t = np.asarray(times, dtype=float)
    out = np.empty((n_proc, t.size), dtype=complex)
    step = max(1, 2**22 // max(1, n_proc * n_sin))
    for lo in range(0, t.size, step):
        arg = dop[:, :, None] * t[None, None, lo:lo + step] + phi[:, :, None]
        out[:, lo:lo + step] = np.exp(1j * arg).sum(axis=1)
    return out / math.sqrt(n_sin)


def _sample_timeseries(cfg, spatial, pattern, profile, seed, n_t, cross):
    from .pilots import ls_estimate

    P, L, d, theta = pattern.P, profile.L, cfg.n_pairs, pattern.theta
    gap = cfg.resolved_symbol_gap()
    # pilot sample k of symbol n sits at n*gap*T_s + (L_cp + k*theta)*T;
    # the sub-sample offset of antenna i is neglected
    n_idx = np.arange(n_t)
    times = (n_idx[:, None] * gap * cfg.T_s + (cfg.L_cp + np.arange(P)[None, :] * theta) * cfg.T).ravel()
    z = jakes_process(times, cfg.f_d, _stream(seed, 1), d * L).reshape(d, L, n_t, P)
    s_xi = nk.psd_sqrt(spatial.xi_s())
    # taps[n, k, l, p] for pair k, tap l at pilot instant p of symbol n
    taps = np.einsum("ab,blnp->nalp", s_xi, z) * np.sqrt(profile.powers)[None, None, :, None]
    x = pattern.x_p
    agg = taps @ x  # H_t x_p per pair and tap, (n, d, L)
    out = np.empty((n_t, d * P), dtype=complex)
    sn = math.sqrt(cfg.sigma_n2)
    fs = []
    for i in range(cfg.n_T):
        tones = pattern.tones[0] if cross == "approx" else pattern.tones[i]
        fs.append(fourier_delay_matrix(cfg.N, profile, tones))
    for b, lo, hi in _blocks(n_t):
        rng = _stream(seed, 2, b)
        for k in range(d):
            y = agg[lo:hi, k, :] @ fs[k // cfg.n_R].T
            if sn:
                y = y + sn * _cn(rng, (hi - lo, P))
            out[lo:hi, k * P:(k + 1) * P] = ls_estimate(y, x)
    return out


def sample_complex_normal(sigma, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` vectors from ``CN(0, sigma)`` using its Hermitian square root."""
    s = nk.psd_sqrt(sigma)
    dim = s.shape[0]
    out = np.empty((n, dim), dtype=complex)
    for b, lo, hi in _blocks(n):
        out[lo:hi] = _cn(_stream(seed, 3, b), (hi - lo, dim)) @ s.T
    return out
