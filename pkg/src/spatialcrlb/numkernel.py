"""Dense complex linear algebra and special-function kernels.

Matrices are plain :class:`numpy.ndarray` objects (2-D, complex or real).
Everything here is a pure function of its inputs.

``vec`` is column-major stacking throughout the package, which fixes the
orientation of the commutation matrix and of :func:`k_otimes`.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CapacityError, InvalidArgumentError, NumericError

#: Largest number of entries any constructed matrix may hold.
MAX_ENTRIES = 2**31

#: Relative singular-value cutoff used by :func:`pinv` when none is given.
DEFAULT_RANK_TOL = 1e-10

# |x| below this uses the power series, above it the Hankel expansion.
# At 12 the series loses ~1e-12 to cancellation and the truncated
# asymptotic expansion is accurate to ~1e-11.
_J0_SWITCH = 12.0


def _check_capacity(*dims: int) -> None:
    total = 1
    for d in dims:
        total *= int(d)
    if total > MAX_ENTRIES:
        raise CapacityError(f"matrix of shape {dims} exceeds {MAX_ENTRIES} entries")


def _as_matrix(a, name="a") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidArgumentError(f"{name} must be a non-empty 2-D matrix, got shape {a.shape}")
    return a


# --------------------------------------------------------------------------
# predicates
# --------------------------------------------------------------------------

def is_hermitian(a, tol: float = 1e-12) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return bool(np.max(np.abs(a - a.conj().T)) <= tol * scale)


def is_psd(a, tol: float = 1e-10) -> bool:
    """Hermitian (to ``tol``) with no eigenvalue below ``-tol * max(1, ||a||)``."""
    if not is_hermitian(a, tol):
        return False
    a = np.asarray(a)
    h = 0.5 * (a + a.conj().T)
    w = np.linalg.eigvalsh(h)
    scale = max(1.0, float(np.max(np.abs(w))))
    return bool(w[0] >= -tol * scale)


def is_unitary(a, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0]))) <= tol)


# --------------------------------------------------------------------------
# Bessel J0
# --------------------------------------------------------------------------

def _j0_series(x: np.ndarray) -> np.ndarray:
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 120):
        term = -term * q / (k * k)
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(1.0, np.abs(total))):
            break
    return total


def _j0_asymptotic(x: np.ndarray) -> np.ndarray:
    # c_k = a_k / x^k with a_k = prod_{m<=k} -(2m-1)^2 / (k! 8^k);
    # P = sum (-1)^j c_{2j}, Q = sum (-1)^j c_{2j+1}.
    # Each element stops once its terms start growing.
    p = np.ones_like(x)
    q = np.zeros_like(x)
    c = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 80):
        nxt = c * (-(2 * k - 1) ** 2) / (8.0 * k * x)
        active &= np.abs(nxt) < np.abs(c)
        if not active.any():
            break
        c = np.where(active, nxt, c)
        sign = -1.0 if (k // 2) % 2 else 1.0
        contrib = np.where(active, sign * c, 0.0)
        if k % 2 == 0:
            p = p + contrib
        else:
            q = q + contrib
        if np.all(np.abs(contrib) <= 1e-17):
            break
    chi = x - 0.25 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Accepts a scalar or an array; returns the same shape (a Python float for
    scalar input). Power series below ``|x| = 12``, Hankel asymptotic
    expansion above. Absolute error is below 1e-10 for ``|x| <= 50``.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("bessel_j0 requires finite input")
    ax = np.abs(np.atleast_1d(arr))
    out = np.empty_like(ax)
    small = ax < _J0_SWITCH
    if small.any():
        out[small] = _j0_series(ax[small])
    if (~small).any():
        out[~small] = _j0_asymptotic(ax[~small])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


# --------------------------------------------------------------------------
# Kronecker / vec / commutation
# --------------------------------------------------------------------------

def kron(a, b) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    _check_capacity(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    return np.kron(a, b)


def vec(a) -> np.ndarray:
    """Column-major stacking of ``a`` into a 1-D vector."""
    a = np.asarray(a)
    if a.ndim == 1:
        return a.copy()
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v)
    if v.size != rows * cols:
        raise InvalidArgumentError(f"cannot reshape length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def commutation_matrix(m: int, n: int) -> np.ndarray:
    """The ``mn x mn`` permutation ``K`` with ``K @ vec(B) == vec(B.T)`` for ``B`` of shape ``(m, n)``."""
    if m < 1 or n < 1:
        raise InvalidArgumentError("commutation_matrix needs m, n >= 1")
    _check_capacity(m * n, m * n)
    k = np.zeros((m * n, m * n))
    i, j = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    # B[i, j] sits at i + j*m in vec(B) and at j + i*n in vec(B.T)
    k[(j + i * n).ravel(), (i + j * m).ravel()] = 1.0
    return k


def k_otimes(nrt: int, p: int) -> np.ndarray:
    """Permutation mapping ``vec(X) kron vec(A)`` onto ``vec(kron(X, A))``.

    ``X`` is ``nrt x nrt`` and ``A`` is ``p x p``. Built as
    ``I_nrt kron K_{nrt,p}^T kron I_p``.
    """
    if nrt < 1 or p < 1:
        raise InvalidArgumentError("k_otimes needs nrt, p >= 1")
    side = (nrt * p) ** 2
    _check_capacity(side, side)
    inner = commutation_matrix(nrt, p).T
    return np.kron(np.kron(np.eye(nrt), inner), np.eye(p))


# --------------------------------------------------------------------------
# decompositions
# --------------------------------------------------------------------------

def svd(a):
    """Full singular value decomposition ``a = U @ diag(s) @ V^H``.

    Returns ``(U, s, V)`` with ``V`` (not ``V^H``), singular values
    non-negative and non-increasing. Backed by LAPACK ``gesdd``.
    """
    a = _as_matrix(a)
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("svd requires finite entries")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge for {a.shape} matrix "
                           f"(max |entry| {np.max(np.abs(a)):.3e}): {exc}") from exc
    return u, s, vh.conj().T


def numerical_rank(a, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    s = np.linalg.svd(_as_matrix(a), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def pinv(a, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse, zeroing singular values below ``rank_tol * s_max``."""
    if not rank_tol > 0:
        raise InvalidArgumentError("rank_tol must be positive")
    a = _as_matrix(a)
    u, s, v = svd(a)
    k = min(a.shape)
    out_dtype = np.result_type(a.dtype, np.float64)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]), dtype=out_dtype)
    keep = s > rank_tol * s[0]
    r = int(np.count_nonzero(keep))
    return (v[:, :r] / s[:r]) @ u[:, :r].conj().T if r else np.zeros((a.shape[1], a.shape[0]), dtype=out_dtype)


def psd_sqrt(a, tol: float = 1e-10) -> np.ndarray:
    """Hermitian square root ``S`` with ``S @ S^H == a``.

    Eigenvalues in ``[-tol * scale, 0)`` are clamped to zero, where
    ``scale = max(1, largest |eigenvalue|)``.
    """
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"psd_sqrt needs a square matrix, got {a.shape}")
    if not is_hermitian(a, tol):
        raise InvalidArgumentError("psd_sqrt input is not Hermitian within tolerance")
    h = 0.5 * (a + a.conj().T)
    w, q = np.linalg.eigh(h)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -tol * scale:
        raise InvalidArgumentError(f"psd_sqrt input has eigenvalue {w[0]:.3e} < -tol")
    root = np.sqrt(np.clip(w, 0.0, None))
    return (q * root) @ q.conj().T
