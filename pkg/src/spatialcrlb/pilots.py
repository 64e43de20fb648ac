"""Comb pilot patterns, pilot sequences and per-tone LS estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class PilotPattern:
    """Frequency-division comb: antenna ``i`` owns tones ``i + k*theta``, ``k < P``.

    ``x_p`` is the length-``P`` pilot sequence shared by all antennas
    (``None`` until one is attached with :meth:`with_sequence`).
    """

    theta: int
    P: int
    n_T: int
    N: int
    x_p: np.ndarray | None = None

    @property
    def tones(self) -> list[np.ndarray]:
        return [i + self.theta * np.arange(self.P) for i in range(self.n_T)]

    def with_sequence(self, x_p) -> "PilotPattern":
        x_p = np.asarray(x_p, dtype=complex).reshape(-1)
        if x_p.size != self.P:
            raise InvalidArgumentError(f"pilot sequence has length {x_p.size}, expected {self.P}")
        return replace(self, x_p=x_p)

    def full_pilot_vector(self, i: int) -> np.ndarray:
        """Length-``N`` transmit vector of antenna ``i`` (zeros off its tones)."""
        if self.x_p is None:
            raise InvalidArgumentError("pattern has no pilot sequence")
        out = np.zeros(self.N, dtype=complex)
        out[self.tones[i]] = self.x_p
        return out


def make_pattern(n_T: int, theta: int, P: int, N: int) -> PilotPattern:
    violated = []
    if P < 1:
        violated.append(f"P >= 1 (P={P})")
    if theta < n_T:
        violated.append(f"theta >= n_T ({theta} < {n_T})")
    if P * theta > N:
        violated.append(f"P*theta <= N ({P}*{theta} > {N})")
    if n_T < 1:
        violated.append(f"n_T >= 1 (n_T={n_T})")
    if violated:
        raise InvalidArgumentError("invalid pilot pattern: " + "; ".join(violated))
    return PilotPattern(theta=int(theta), P=int(P), n_T=int(n_T), N=int(N))


def gen_pilot_sequence(kind: str, P: int, omega_matrix=None, seed: int = 0) -> np.ndarray:
    """Generate a pilot sequence with ``||x_p||^2 == P``.

    ``"qpsk_random"`` draws unit-modulus QPSK symbols. ``"omega_eigvec"``
    returns the dominant eigenvector of the Doppler correlation matrix,
    scaled to norm ``sqrt(P)`` with its entries summing to a positive real.
    """
    if P < 1:
        raise InvalidArgumentError("P must be >= 1")
    if kind == "qpsk_random":
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(7,)))
        bits = rng.integers(0, 2, size=(P, 2))
        return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / math.sqrt(2)
    if kind == "omega_eigvec":
        if omega_matrix is None:
            raise InvalidArgumentError("omega_eigvec pilots need omega_matrix")
        om = np.asarray(omega_matrix)
        if om.shape != (P, P):
            raise InvalidArgumentError(f"omega_matrix must be {P}x{P}")
        _, q = np.linalg.eigh(0.5 * (om + om.conj().T))
        v = q[:, -1].astype(complex)
        s = v.sum()
        if abs(s) > 0:
            v = v * (abs(s) / s)
        return v * (math.sqrt(P) / np.linalg.norm(v))
    raise InvalidArgumentError(f"unknown pilot kind {kind!r}")


def omega_of(x_p, omega_matrix) -> float:
    """Doppler gain ``x_p^H Omega x_p`` (real for symmetric ``Omega``)."""
    x = np.asarray(x_p)
    return float(np.real(np.conj(x) @ np.asarray(omega_matrix) @ x))


def effective_A(x_p, R) -> np.ndarray:
    """``X_p^H R X_p`` with ``X_p = diag(x_p)``."""
    x = np.asarray(x_p)
    return np.conj(x)[:, None] * np.asarray(R) * x[None, :]


def ls_estimate(y_pilot, x_p) -> np.ndarray:
    """Per-tone LS estimate ``y / x_p``; works row-wise on stacked observations."""
    y = np.asarray(y_pilot)
    x = np.asarray(x_p)
    if y.shape[-1] != x.shape[-1]:
        raise InvalidArgumentError("observation and pilot lengths differ")
    if np.any(x == 0):
        raise InvalidArgumentError("pilot sequence has a zero entry")
    return y / x


def assemble_complete(blocks: Sequence[Sequence]) -> np.ndarray:
    """Stack an ``n_R x n_T`` grid of length-``P`` estimates into a ``(P n_R) x n_T`` matrix.

    ``blocks[j][i]`` is the estimate between transmit antenna ``i`` and
    receive antenna ``j``; column ``i`` of the result stacks
    ``blocks[0][i], ..., blocks[n_R-1][i]``.
    """
    n_R = len(blocks)
    if n_R == 0:
        raise InvalidArgumentError("empty block grid")
    n_T = len(blocks[0])
    if n_T == 0 or any(len(row) != n_T for row in blocks):
        raise InvalidArgumentError("block grid rows must all have n_T entries")
    P = None
    cols = []
    for i in range(n_T):
        col = []
        for j in range(n_R):
            b = blocks[j][i]
            if b is None:
                raise InvalidArgumentError(f"missing block (rx {j}, tx {i})")
            b = np.asarray(b).reshape(-1)
            if P is None:
                P = b.size
            elif b.size != P:
                raise InvalidArgumentError("blocks must share one length")
            col.append(b)
        cols.append(np.concatenate(col))
    return np.stack(cols, axis=1)
