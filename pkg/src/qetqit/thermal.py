"""Hamiltonians, Gibbs and thermofield-double states, ergotropy.

Every :class:`Hamiltonian` is shifted on construction so its ground energy is
exactly zero. Inverse temperatures may be ``math.inf`` (ground-space state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .entropy import von_neumann
from .linalg import (
    DensityMatrix,
    SpectralDecomposition,
    as_matrix,
    eig_hermitian,
    matrix_from_json,
    matrix_to_json,
    random_hermitian,
)

MAX_TENSOR_DIM = 256
BETA_BRACKET = (1e-6, 1e6)
BISECTION_STEPS = 200
ENTROPY_EDGE = 1e-12


class Hamiltonian:
    """Bounded Hermitian observable with ground energy pinned to 0."""

    def __init__(self, matrix):
        w, v = eig_hermitian(as_matrix(matrix))
        self.ground_offset = float(w[0])
        self.energies = w - w[0]
        self.energies[0] = 0.0
        self.basis = v
        self.matrix = (v * self.energies) @ v.conj().T
        for a in (self.energies, self.basis, self.matrix):
            a.setflags(write=False)

    @classmethod
    def from_eigenvalues(cls, eigenvalues) -> "Hamiltonian":
        return cls(np.diag(np.asarray(eigenvalues, dtype=float)))

    @classmethod
    def random(cls, d: int, seed=None, scale: float = 1.0) -> "Hamiltonian":
        return cls(scale * random_hermitian(d, seed))

    @classmethod
    def from_json(cls, obj) -> "Hamiltonian":
        if "eigenvalues" in obj:
            ev = obj["eigenvalues"]
            if not ev:
                raise ValueError("eigenvalue list is empty")
            return cls.from_eigenvalues(ev)
        return cls(matrix_from_json(obj))

    def to_json(self) -> dict:
        if np.allclose(self.matrix, np.diag(np.diag(self.matrix)), atol=0.0, rtol=0.0):
            return {"eigenvalues": [float(x) for x in np.real(np.diag(self.matrix))]}
        return matrix_to_json(self.matrix)

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def norm(self) -> float:
        return float(self.energies[-1])

    @cached_property
    def ground_degeneracy(self) -> int:
        tol = 1e-10 * max(1.0, self.norm)
        return int(np.count_nonzero(self.energies <= tol))

    def expect(self, rho) -> float:
        return float(np.real(np.trace(self.matrix @ as_matrix(rho))))

    def tensor_sum(self, n: int) -> "Hamiltonian":
        """sum_i H^(i) on n copies, as an explicit d^n matrix."""
        d = self.dim
        if d**n > MAX_TENSOR_DIM:
            raise ValueError(f"{n} copies of a {d}-level system exceed {MAX_TENSOR_DIM} dimensions")
        total = np.zeros((d**n, d**n), dtype=complex)
        for i in range(n):
            total += np.kron(np.kron(np.eye(d**i), self.matrix), np.eye(d ** (n - i - 1)))
        return Hamiltonian(total)

    def __repr__(self) -> str:
        return f"Hamiltonian(dim={self.dim}, energies={np.round(self.energies, 6).tolist()})"


def gibbs_weights(energies, beta: float) -> tuple[np.ndarray, float]:
    """Boltzmann weights and log Z for a ground-pinned spectrum.

    log Z is assembled as log g0 + log1p(excited weight / g0) so that it keeps
    full relative accuracy at low temperature.
    """
    e = np.asarray(energies, dtype=float)
    if beta < 0 or math.isnan(beta):
        raise ValueError("inverse temperature must be nonnegative")
    e = e - e.min()
    ground = e <= 1e-10 * max(1.0, float(e.max()))
    g0 = int(ground.sum())
    if math.isinf(beta):
        return (ground / g0).astype(float), math.log(g0)
    w = np.where(ground, 1.0, np.exp(-beta * e))
    log_z = math.log(g0) + math.log1p(float(w[~ground].sum()) / g0)
    return w / math.exp(log_z), log_z


def gibbs_entropy(h: Hamiltonian, beta: float) -> float:
    """S(tau_beta) = beta <H> + log Z."""
    p, log_z = gibbs_weights(h.energies, beta)
    if math.isinf(beta):
        return log_z
    return float(beta * (p @ h.energies)) + log_z


@dataclass(frozen=True, eq=False)
class GibbsData:
    beta: float
    tau: DensityMatrix
    log_Z: float
    hamiltonian: Hamiltonian

    @property
    def energy(self) -> float:
        return self.hamiltonian.expect(self.tau)

    @property
    def entropy(self) -> float:
        return von_neumann(self.tau)


def gibbs_state(h: Hamiltonian, beta: float) -> GibbsData:
    p, log_z = gibbs_weights(h.energies, beta)
    v = h.basis
    spectrum = SpectralDecomposition(p[::-1].copy(), v[:, ::-1].copy())
    tau = DensityMatrix((v * p) @ v.conj().T, known_spectrum=spectrum)
    return GibbsData(float(beta), tau, log_z, h)


@dataclass(frozen=True, eq=False)
class TFDState:
    ket: np.ndarray  # on A (x) B, A index major
    beta: float
    hamiltonian: Hamiltonian

    @property
    def dims(self) -> tuple[int, int]:
        d = self.hamiltonian.dim
        return (d, d)

    def marginal_b(self) -> np.ndarray:
        m = self.ket.reshape(self.dims)
        return m.T @ m.conj()


def tfd_state(h: Hamiltonian, beta: float) -> TFDState:
    """(I_A (x) sqrt(tau_beta)) |I>, so that Alice holds the conjugate energy basis."""
    p, _ = gibbs_weights(h.energies, beta)
    v = h.basis
    sqrt_tau = (v * np.sqrt(p)) @ v.conj().T
    # amplitude (a, b) = <b| sqrt(tau) |a>
    ket = np.ascontiguousarray(sqrt_tau.T).reshape(-1)
    ket = ket / np.linalg.norm(ket)
    return TFDState(ket, float(beta), h)


class Ergotropy(NamedTuple):
    value: float
    extractor: np.ndarray


def passive_energy(probs, energies) -> float:
    """min_U Tr H U rho U^dag: largest populations on the lowest energies."""
    p = np.sort(np.asarray(probs, dtype=float))[::-1]
    e = np.sort(np.asarray(energies, dtype=float))
    return float(p @ e)


def ergotropy(rho, h: Hamiltonian) -> Ergotropy:
    """Maximal unitary work Tr H rho - min_U Tr H U rho U^dag, with its optimal unitary."""
    if isinstance(rho, DensityMatrix):
        r, vr = rho.spectrum
    else:
        r, vr = eig_hermitian(rho)
    if r.size != h.dim:
        raise ValueError(f"state dimension {r.size} does not match Hamiltonian dimension {h.dim}")
    # descending populations onto ascending energies
    vr = vr[:, ::-1]
    r = np.clip(r[::-1], 0.0, None)
    u = h.basis @ vr.conj().T
    value = h.expect(rho) - float(r @ h.energies)
    return Ergotropy(value, u)


def effective_beta(rho, h: Hamiltonian) -> float:
    """Inverse temperature whose Gibbs state matches the entropy of ``rho``.

    Returns 0.0 for maximal entropy and ``math.inf`` at or below the
    zero-temperature entropy floor log(ground degeneracy).
    """
    s = rho if isinstance(rho, float) else von_neumann(rho)
    return effective_beta_from_entropy(s, h)


def effective_beta_from_entropy(s: float, h: Hamiltonian) -> float:
    top = math.log(h.dim)
    floor = math.log(h.ground_degeneracy)
    if s >= top - ENTROPY_EDGE:
        return 0.0
    if s <= floor + ENTROPY_EDGE:
        return math.inf

    def excess(beta):
        return gibbs_entropy(h, beta) - s

    lo, hi = BETA_BRACKET
    if excess(lo) <= 0.0:
        a, b = 0.0, lo
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (a + b)
            if excess(mid) > 0.0:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)
    if excess(hi) >= 0.0:
        return hi
    a, b = math.log(lo), math.log(hi)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (a + b)
        if excess(math.exp(mid)) > 0.0:
            a = mid
        else:
            b = mid
        if b - a < 1e-15:
            break
    return math.exp(0.5 * (a + b))


def regularized_ergotropy(rho, h: Hamiltonian) -> float:
    """Asymptotic per-copy ergotropy S(rho || tau_beta*) / beta*."""
    s = von_neumann(rho)
    beta = effective_beta_from_entropy(s, h)
    energy = h.expect(rho)
    if math.isinf(beta):
        return energy
    if beta == 0.0:
        return 0.0
    _, log_z = gibbs_weights(h.energies, beta)
    return (beta * energy + log_z - s) / beta


def tensor_power_spectra(probs, energies, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Spectra of rho^{(x)n} and sum_i H^(i) without building d^n matrices."""
    p = np.asarray(probs, dtype=float)
    e = np.asarray(energies, dtype=float)
    if p.size**n > MAX_TENSOR_DIM:
        raise ValueError(f"{n} copies of a {p.size}-level system exceed {MAX_TENSOR_DIM} dimensions")
    pn, en = np.ones(1), np.zeros(1)
    for _ in range(n):
        pn = np.multiply.outer(pn, p).ravel()
        en = np.add.outer(en, e).ravel()
    return pn, en


def tensor_power_ergotropy_per_copy(rho, h: Hamiltonian, n: int) -> float:
    """(1/n) * ergotropy of rho^{(x)n} under sum_i H^(i), computed exactly from spectra."""
    if n < 1:
        raise ValueError("need at least one copy")
    rho = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
    if rho.dim != h.dim:
        raise ValueError(f"state dimension {rho.dim} does not match Hamiltonian dimension {h.dim}")
    pn, en = tensor_power_spectra(rho.eigenvalues, h.energies, n)
    return (n * h.expect(rho) - passive_energy(pn, en)) / n
