"""Entropies, relative entropies and continuity bounds, all in nats.

Support violations are reported as ``math.inf`` rather than raised, so that
sweeps over steered (often pure) states never abort.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .linalg import (
    SUPPORT_CUTOFF,
    DensityMatrix,
    as_matrix,
    eig_hermitian,
    hermitian_part,
    kron,
    matrix_func_psd,
)

SUPPORT_TOL = 1e-10

_Y = np.array([[0, -1j], [1j, 0]])
_YY = kron(_Y, _Y)


def _spectrum(rho):
    if isinstance(rho, DensityMatrix):
        return rho.spectrum
    return eig_hermitian(rho)


def shannon(p) -> float:
    """-sum p log p over entries above the support cutoff.

    For a normalised vector the largest entry enters as (1 - r) log(1 - r)
    with r the sum of the others, so nearly pure distributions keep full
    relative accuracy.
    """
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return 0.0
    p = p[p > 0.0]
    if p.size == 0:
        return 0.0
    top = int(np.argmax(p))
    rest = np.delete(p, top)
    r = float(rest.sum())
    if abs(p[top] + r - 1.0) <= 1e-12:
        head = -(1.0 - r) * math.log1p(-r) if r < 1.0 else 0.0
    else:
        head = -p[top] * math.log(p[top])
    return float(head - (rest * np.log(rest)).sum()) + 0.0


def entropies_from_spectra(w: np.ndarray) -> np.ndarray:
    """Row-wise von Neumann entropy of a stack of eigenvalue vectors."""
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    top = w.max(axis=-1, keepdims=True)
    on = w > SUPPORT_CUTOFF * top
    logs = np.log(np.where(on, w, 1.0))
    return -(np.where(on, w * logs, 0.0)).sum(axis=-1)


def von_neumann(rho) -> float:
    """S(rho) = -Tr rho log rho; eigenvalues below the support cutoff count as 0."""
    w, _ = _spectrum(rho)
    w = np.clip(w, 0.0, None)
    if not (isinstance(rho, DensityMatrix) and rho.known_spectrum is not None):
        w = np.where(w > SUPPORT_CUTOFF * w.max(), w, 0.0)  # eigensolver noise
    return shannon(w)


def relative_entropy(rho, sigma) -> float:
    """Umegaki relative entropy Tr rho (log rho - log sigma).

    Returns ``inf`` when rho has weight above ``SUPPORT_TOL`` outside the
    support of sigma.
    """
    r, vr = _spectrum(rho)
    s, vs = _spectrum(sigma)
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape[0]} vs {s.shape[0]}")
    r = np.clip(r, 0.0, None)
    s = np.clip(s, 0.0, None)
    overlap = np.abs(vr.conj().T @ vs) ** 2  # overlap[i, j] = |<r_i|s_j>|^2
    weights = r @ overlap  # weight of rho on each eigenvector of sigma
    on = s > SUPPORT_CUTOFF * s.max()
    if weights[~on].sum() > SUPPORT_TOL:
        return math.inf
    cross = float(weights[on] @ np.log(s[on]))
    return -shannon(r) - cross


def max_relative_entropy(rho, sigma) -> float:
    """log of the smallest alpha with rho <= alpha * sigma (``inf`` if none)."""
    a = as_matrix(rho)
    s, vs = _spectrum(sigma)
    if a.shape[0] != s.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {s.shape[0]}")
    s = np.clip(s, 0.0, None)
    on = s > SUPPORT_CUTOFF * s.max()
    a_sig = vs.conj().T @ a @ vs  # rho in sigma's eigenbasis
    if np.real(np.trace(a_sig[np.ix_(~on, ~on)])) > SUPPORT_TOL:
        return math.inf
    inv = 1.0 / np.sqrt(s[on])
    m = inv[:, None] * a_sig[np.ix_(on, on)] * inv[None, :]
    top = float(np.linalg.eigvalsh(hermitian_part(m, tol=1e-6)).max())
    if top <= 0.0:
        return -math.inf
    return math.log(top)


def binary_entropy(eps: float) -> float:
    if not 0.0 <= eps <= 1.0:
        raise ValueError("binary entropy needs 0 <= eps <= 1")
    return shannon([eps, 1.0 - eps])


class ContinuityBounds(NamedTuple):
    entropy_bound: float
    energy_bound: float
    h2: float


def continuity_bounds(eps: float, d: int, h_norm: float) -> ContinuityBounds:
    """Fannes-Audenaert entropy bound and the Hoelder energy bound at trace distance eps."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if h_norm < 0:
        raise ValueError("operator norm must be nonnegative")
    h2 = binary_entropy(eps)
    return ContinuityBounds(eps * math.log(d - 1) + h2, eps * h_norm, h2)


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state."""
    a = hermitian_part(as_matrix(rho))
    if a.shape != (4, 4):
        raise ValueError(f"concurrence needs a 4x4 two-qubit state, got {a.shape}")
    tilde = _YY @ a.conj() @ _YY
    sq = matrix_func_psd(a, "sqrt")
    # sqrt of eigenvalues of rho*rho_tilde, via the Hermitian form sqrt(rho) rho_tilde sqrt(rho)
    lam = np.linalg.eigvalsh(hermitian_part(sq @ tilde @ sq, tol=1e-6))
    lam = np.sort(np.sqrt(np.clip(lam, 0.0, None)))[::-1]
    return max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))


def two_qubit_ef(rho) -> float:
    """Entanglement of formation of a two-qubit state, nats."""
    c = min(concurrence(rho), 1.0)
    x = 0.5 * (1.0 + math.sqrt(max(0.0, 1.0 - c * c)))
    return binary_entropy(x)


def to_bits(value: float) -> float:
    return value / math.log(2.0)


def relative_entropies(rhos, sigma) -> np.ndarray:
    """S(rho_x || sigma) for a stack of states against one full-rank sigma.

    Falls back to :func:`relative_entropy` one state at a time when sigma is
    rank deficient.
    """
    rhos = np.asarray(rhos, dtype=complex)
    s, vs = _spectrum(sigma)
    if s.min() <= SUPPORT_CUTOFF * s.max():
        return np.array([relative_entropy(r, sigma) for r in rhos])
    log_sigma = (vs * np.log(s)) @ vs.conj().T
    herm = 0.5 * (rhos + rhos.conj().transpose(0, 2, 1))
    ent = entropies_from_spectra(np.linalg.eigvalsh(herm))
    cross = np.einsum("xij,ji->x", herm, log_sigma).real
    return -ent - cross
