"""Fisher information, CRLB and the closed-form MSE lower bounds for the spatial correlation.

Two routes to the CRLB are kept separate on purpose:

* the generic route forms the full Fisher matrix from the Wishart
  covariance of the sample auto-correlation (only for small systems,
  ``n_T n_R P <= 32``), then inverts it;
* the factored route uses ``J = coef * N_t * (Xi^-H kron Xi^-T)`` with the
  scalar ``coef`` equal to ``alpha`` (no noise) or ``beta`` (finite SNR).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numkernel as nk
from .channel import (PowerDelayProfile, SpatialCorrelation, SystemConfig, doppler_corr,
                      freq_corr)
from .errors import InvalidArgumentError, NumericError
from .estimator import CHANNEL_RANK_TOL, significant_order
from .pilots import PilotPattern, effective_A, omega_of

#: Constant inside the Bessel approximation of the largest Doppler eigenvalue.
LAMBDA_MAX_C = 0.35
#: Largest normalized Doppler spread for which that approximation is used.
LAMBDA_MAX_VALID = 0.35
#: Largest ``n_T n_R P`` for which the Fisher matrix is formed explicitly.
GENERIC_MAX_DIM = 32


class PreconditionWarning(UserWarning):
    """A closed-form approximation was used outside its stated range."""


class RankDeficientWarning(UserWarning):
    """A Fisher matrix was singular and a pseudo-inverse was used."""


def _sigma_prime(xi_s, A, omega, sigma_n2, N_t, model):
    d, P = xi_s.shape[0], A.shape[0]
    if model == "exact":
        s = omega * nk.kron(xi_s, A) + sigma_n2 * np.eye(d * P)
    elif model == "kron":
        s = omega * nk.kron(xi_s, A + (sigma_n2 / omega) * np.eye(P))
    else:
        raise InvalidArgumentError(f"unknown covariance model {model!r}")
    return s / N_t


def fisher_information(xi_s, A, omega: float, sigma_n2: float, N_t: int, *,
                       pseudo_inverse: bool = False, model: str = "exact",
                       method: str = "auto", rank_tol: float = nk.DEFAULT_RANK_TOL) -> np.ndarray:
    """Fisher information of ``vec(Xi_s)`` under the complex Wishart model.

    ``model="exact"`` uses ``Sigma' = (omega Xi kron A + sigma_n2 I) / N_t``;
    ``model="kron"`` uses the finite-SNR Kronecker form
    ``omega/N_t * Xi kron (A + sigma_n2/omega I)``. Both agree without noise.

    ``method="generic"`` assembles
    ``(omega^2/N_t) G K^T (Sigma'^-H kron Sigma'^-T) K G^H`` with
    ``G = I kron vec(A)^T`` and ``K`` from :func:`~spatialcrlb.numkernel.k_otimes`.
    ``method="factored"`` returns ``coef N_t (Xi^-H kron Xi^-T)``, only
    valid for the Kronecker model. ``"auto"`` picks generic when
    ``n_T n_R P <= 32``.
    """
    xi_s = np.asarray(xi_s, dtype=complex)
    A = np.asarray(A, dtype=complex)
    d, P = xi_s.shape[0], A.shape[0]
    if xi_s.shape != (d, d) or A.shape != (P, P):
        raise InvalidArgumentError("xi_s and A must be square")
    if not omega > 0 or N_t < 1 or sigma_n2 < 0:
        raise InvalidArgumentError("need omega > 0, N_t >= 1, sigma_n2 >= 0")
    if method == "auto":
        method = "generic" if d * P <= GENERIC_MAX_DIM else "factored"
    if method == "factored":
        if model == "exact" and sigma_n2 > 0 and not np.allclose(xi_s, np.eye(d)):
            raise InvalidArgumentError("the factored Fisher matrix needs the Kronecker covariance model")
        coef = alpha_of(A) if sigma_n2 == 0 else finite_snr_coefficient(A, omega, sigma_n2)
        xinv = np.linalg.inv(xi_s)
        return coef * N_t * nk.kron(xinv.conj().T, xinv.T)
    if method != "generic":
        raise InvalidArgumentError(f"unknown method {method!r}")

    sp = _sigma_prime(xi_s, A, omega, sigma_n2, N_t, model)
    if sigma_n2 == 0 and not pseudo_inverse:
        if nk.numerical_rank(sp, rank_tol) < sp.shape[0]:
            raise NumericError("Sigma' is singular without noise; request pseudo_inverse=True")
    if pseudo_inverse:
        spi = nk.pinv(sp, rank_tol)
    else:
        try:
            spi = np.linalg.inv(sp)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"Sigma' is singular: {exc}") from exc
    K = nk.k_otimes(d, P)
    G = nk.kron(np.eye(d * d), nk.vec(A)[None, :])
    M = G @ K.T
    core = nk.kron(spi.conj().T, spi.T)
    # (omega/N_t)^2 from d vec(Sigma')/d vec(Xi), times N_t from Var[vec(B^T)]
    J = (omega**2 / N_t) * (M @ core @ M.conj().T)
    return 0.5 * (J + J.conj().T)


def crlb(J, rank_tol: float = nk.DEFAULT_RANK_TOL) -> np.ndarray:
    """Inverse of the Fisher matrix, or its pseudo-inverse when singular (warns)."""
    J = np.asarray(J)
    if nk.numerical_rank(J, rank_tol) < J.shape[0]:
        warnings.warn("Fisher matrix is rank deficient; returning its pseudo-inverse",
                      RankDeficientWarning, stacklevel=2)
        return nk.pinv(J, rank_tol)
    return np.linalg.inv(J)


def crlb_closed_form(xi_s, coef: float, N_t: int) -> np.ndarray:
    """``(Xi^H kron Xi^T) / (coef N_t)``."""
    xi_s = np.asarray(xi_s)
    return nk.kron(xi_s.conj().T, xi_s.T) / (coef * N_t)


def alpha_of(A, rank_tol: float = CHANNEL_RANK_TOL) -> float:
    """``vec(A)^T (A^+H kron A^+T) vec(A)^*``, which equals the rank of ``A``.

    Evaluated through the equivalent form
    ``sum((A^+ A) * conj(A A^+))`` with both projectors taken from the SVD,
    so tiny retained singular values do not amplify rounding error.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError("A must be square")
    u, s, v = nk.svd(A)
    if s[0] == 0:
        return 0.0
    r = int(np.count_nonzero(s > rank_tol * s[0]))
    right = v[:, :r] @ v[:, :r].conj().T
    left = u[:, :r] @ u[:, :r].conj().T
    return float(np.real(np.sum(right * np.conj(left))))


def alpha_quadratic_form(A, rank_tol: float = CHANNEL_RANK_TOL) -> complex:
    """Literal Kronecker evaluation of the alpha quadratic form (small ``A`` only)."""
    A = np.asarray(A)
    ap = nk.pinv(A, rank_tol)
    va = nk.vec(A)
    return complex(va @ nk.kron(ap.conj().T, ap.T) @ va.conj())


def finite_snr_coefficient(A, omega: float, sigma_n2: float) -> float:
    """``vec(A)^T (M^-H kron M^-T) vec(A)^*`` with ``M = A + sigma_n2/omega I``."""
    A = np.asarray(A)
    M = A + (sigma_n2 / omega) * np.eye(A.shape[0])
    left = np.linalg.solve(M, A)           # M^-1 A
    right = np.linalg.solve(M.T, A.T).T    # A M^-1
    return float(np.real(np.sum(left * np.conj(right))))


def tmse_lb(n_T: int, n_R: int, L_s: int, N_t: int) -> float:
    if min(n_T, n_R, L_s, N_t) < 1:
        raise InvalidArgumentError("tmse_lb arguments must all be >= 1")
    return (n_T * n_R) ** 2 / (L_s * N_t)


def avgmse_lb_asymptotic(L_s: int, N_t: int) -> float:
    if L_s < 1 or N_t < 1:
        raise InvalidArgumentError("L_s and N_t must be >= 1")
    return 1.0 / (L_s * N_t)


def avgmse_lb_finite(beta_max: float, N_t: int) -> float:
    if not beta_max > 0 or N_t < 1:
        raise InvalidArgumentError("need beta_max > 0 and N_t >= 1")
    return 1.0 / (beta_max * N_t)


def _gain_sum(gain_eigs):
    # sum_l [1 / (1 + 1/g_l)]^2 written as (g/(1+g))^2 to stay finite at g = 0
    g = np.asarray(gain_eigs, dtype=float)
    return float(np.sum((g / (1.0 + g)) ** 2))


def beta_of(A, omega: float, sigma_n2: float, rank_tol: float = CHANNEL_RANK_TOL) -> float:
    """``sum_l [1 / (1 + (omega rho_l)^-1)]^2`` over the nonzero eigenvalues of ``A``, ``rho_l = lam_l / sigma_n2``."""
    if not sigma_n2 > 0:
        raise InvalidArgumentError("beta_of needs sigma_n2 > 0; use alpha_of without noise")
    if not omega > 0:
        raise InvalidArgumentError("omega must be positive")
    A = np.asarray(A)
    lam = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
    lam = lam[lam > rank_tol * max(lam.max(), 0.0)] if lam.max() > 0 else lam[:0]
    return _gain_sum(omega * lam / sigma_n2)


def lambda_max_approx(P: int, theta: int, f_d: float, T_s: float, c: float = LAMBDA_MAX_C) -> float:
    """``P J0(2 pi c theta f_d T_s)``, the approximate largest Doppler eigenvalue."""
    return P * nk.bessel_j0(2 * math.pi * c * theta * f_d * T_s)


def omega_span_matrix(P: int, theta: int, f_d: float, T_s: float) -> np.ndarray:
    """Doppler correlation of ``P`` pilots whose total span is ``T_s``.

    This is the matrix whose largest eigenvalue :func:`lambda_max_approx`
    targets: entries ``J0(2 pi (theta f_d T_s) (k1 - k2) / P)``.
    """
    return doppler_corr(P, theta, f_d, T_s / P)


def beta_max_of(P: int, theta: int, f_d: float, T_s: float, eigenvalues, sigma_n2: float,
                *, omega_matrix=None) -> float:
    """Upper bound of ``beta`` with ``omega`` replaced by ``P * lambda_max``.

    Inside ``theta f_d T_s <= 0.35`` ``lambda_max`` is the Bessel
    approximation; outside it the exact largest eigenvalue of
    ``omega_matrix`` (default :func:`omega_span_matrix`) is used and a
    :class:`PreconditionWarning` is raised. Without noise the bound is the
    number of positive eigenvalues.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    top = lam.max() if lam.size else 0.0
    lam = lam[lam > CHANNEL_RANK_TOL * top] if top > 0 else lam[:0]
    if sigma_n2 == 0:
        return float(lam.size)
    x = theta * f_d * T_s
    if x <= LAMBDA_MAX_VALID:
        lmax = lambda_max_approx(P, theta, f_d, T_s)
    else:
        warnings.warn(f"theta*f_d*T_s = {x:.4g} exceeds {LAMBDA_MAX_VALID}; "
                      "using the exact largest Doppler eigenvalue", PreconditionWarning, stacklevel=2)
        om = omega_span_matrix(P, theta, f_d, T_s) if omega_matrix is None else np.asarray(omega_matrix)
        lmax = float(np.linalg.eigvalsh(om)[-1])
    return _gain_sum(P * lmax * lam / sigma_n2)


# --------------------------------------------------------------------------
# full report
# --------------------------------------------------------------------------

@dataclass
class BoundsReport:
    tmse_lb: float
    avgmse_lb_asymptotic: float
    beta: float
    beta_max: float
    avgmse_lb_finite: float
    omega: float
    L_s: int
    L: int
    alpha: float
    effective_snrs: list
    normalized_doppler: float
    beta_max_precondition: bool
    omega_bound: float
    finite_snr_model: str = "kron"
    crlb_method: str = ""
    crlb: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self, include_crlb: bool = False) -> dict:
        out = asdict(self)
        out.pop("crlb")
        out["effective_snrs"] = [float(v) for v in self.effective_snrs]
        if include_crlb and self.crlb is not None:
            out["crlb"] = [[[float(z.real), float(z.imag)] for z in row] for row in self.crlb]
        return out


def compute_bounds(cfg: SystemConfig, profile: PowerDelayProfile, spatial: SpatialCorrelation,
                   pattern: PilotPattern, *, threshold_db: float = 0.0,
                   with_crlb: bool = True) -> BoundsReport:
    """Every bound for one configuration, without any simulation."""
    if pattern.x_p is None:
        raise InvalidArgumentError("pilot pattern has no pilot sequence")
    P, theta = pattern.P, pattern.theta
    om = doppler_corr(P, theta, cfg.f_d, cfg.T)
    omega = omega_of(pattern.x_p, om)
    A = effective_A(pattern.x_p, freq_corr(profile, cfg.N, pattern.tones[0]))
    lam = np.sort(np.linalg.eigvalsh(0.5 * (A + A.conj().T)))[::-1]
    L = nk.numerical_rank(A, CHANNEL_RANK_TOL)
    L_s, _ = significant_order(A, omega, cfg.sigma_n2, threshold_db)
    L_s = max(L_s, 1)
    alpha = alpha_of(A)
    sn2 = cfg.sigma_n2
    beta = beta_of(A, omega, sn2) if sn2 > 0 else float(L)
    x = theta * cfg.f_d * cfg.T_s
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PreconditionWarning)
        bmax = beta_max_of(P, theta, cfg.f_d, cfg.T_s, lam, sn2)
    eff = (omega * lam[:L] / sn2) if sn2 > 0 else np.full(L, np.inf)
    rep = BoundsReport(
        tmse_lb=tmse_lb(cfg.n_T, cfg.n_R, L_s, cfg.N_t),
        avgmse_lb_asymptotic=avgmse_lb_asymptotic(L_s, cfg.N_t),
        beta=beta,
        beta_max=bmax,
        avgmse_lb_finite=avgmse_lb_finite(bmax, cfg.N_t),
        omega=omega,
        L_s=L_s,
        L=L,
        alpha=alpha,
        effective_snrs=list(eff),
        normalized_doppler=x,
        beta_max_precondition=x <= LAMBDA_MAX_VALID,
        omega_bound=P * lambda_max_approx(P, theta, cfg.f_d, cfg.T_s),
    )
    if with_crlb:
        xi = spatial.xi_s()
        if xi.shape[0] * P <= GENERIC_MAX_DIM:
            J = fisher_information(xi, A, omega, sn2, cfg.N_t, pseudo_inverse=(sn2 == 0),
                                   model="kron", method="generic")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficientWarning)
                rep.crlb = crlb(J)
            rep.crlb_method = "generic"
        else:
            rep.crlb = crlb_closed_form(xi, alpha if sn2 == 0 else beta, cfg.N_t)
            rep.crlb_method = "closed-form"
    return rep
