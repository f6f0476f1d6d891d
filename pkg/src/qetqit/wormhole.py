"""Traversable-wormhole energy curve and the double-trace deformation as LOCC.

Majoranas are normalised as {psi_a, psi_b} = delta_ab, so psi^2 = 1/2.

Register layout for the Majorana simulation. Each side carries ``n_sys``
system Majoranas plus auxiliary ones; Alice's chain is [sys][aux] and Bob's
is [aux][sys], and a single Jordan-Wigner string runs over Alice's qubits
then Bob's. With this layout the auxiliary qubits are adjacent, so the
auxiliary EPR condition only constrains the auxiliary factor and the joint
state is v[a_sys, b_sys] * e[a_aux, b_aux].

Conventions fixed here (the deformation is written loosely in the
literature):

* the coupling is e^{i g V} with the Hermitian V = (i/K) sum_i psi_i^A psi_i^B;
* on the auxiliary EPR sector this equals exp(i (2g/K) sum_i Q_i) with
  Q_i = psi_i^A psi_i^B psi_0^A psi_0^B, which is Hermitian;
* outcome s_i = +1 projects onto the kernel of psi_i^A + i psi_0^A, and Bob
  then applies exp(-s_i (g/K) psi_0^B psi_i^B), a real exponent of an
  anti-Hermitian bilinear and hence unitary.

``aux_mode="per_pair"`` gives every coupled pair its own auxiliary pair; the
operator identity is then exact for every K. ``aux_mode="shared"`` uses a
single auxiliary pair for all K couplings; it is exact only at K = 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .linalg import as_rng, random_ket, trace_distance
from .thermal import Hamiltonian, gibbs_weights

MAX_MODES = 12
MAX_PAIRS = 4
MAX_SIDE_DIM = 32
AUX_MODES = ("per_pair", "shared")

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)


# -- teleported energy curve -------------------------------------------------


@dataclass(frozen=True)
class WormholeParams:
    g: float
    delta: float
    beta: float
    t: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("conformal weight delta must be positive")
        if not self.beta > 0:
            raise ValueError("inverse temperature beta must be positive")
        if self.t < 0:
            raise ValueError("delay time t must be nonnegative")


def teleported_energy(g, delta, beta, t):
    """g Delta (2 pi/beta)^{2 Delta+1} tanh(pi t/beta) / cosh^{2 Delta}(pi t/beta).

    Vectorised in every argument. Negative t is accepted and gives the odd
    continuation.
    """
    x = np.pi * np.asarray(t, dtype=float) / beta
    # cosh^{-2 Delta} through log-cosh so large t underflows to 0 instead of overflowing
    log_cosh = np.logaddexp(x, -x) - math.log(2.0)
    out = g * delta * (2 * np.pi / beta) ** (2 * delta + 1) * np.tanh(x) * np.exp(-2 * delta * log_cosh)
    return float(out) if np.ndim(out) == 0 else out


def energy_of(p: WormholeParams) -> float:
    return teleported_energy(p.g, p.delta, p.beta, p.t)


@dataclass(frozen=True)
class PeakTime:
    t_star: float
    e_star_per_g: float
    t_numeric: float
    t_golden: float

    @property
    def discrepancy(self) -> float:
        return abs(self.t_star - self.t_numeric)


def _log_slope(t, delta, beta):
    """d/dt log E, written from the curve without using the stationarity solution."""
    x = np.pi * t / beta
    return (np.pi / beta) * (1.0 / (np.sinh(x) * np.cosh(x)) - 2 * delta * np.tanh(x))


def peak_time(delta: float, beta: float) -> PeakTime:
    """Closed-form maximiser (beta/pi) arcsinh(1/sqrt(2 Delta)) with two numeric cross-checks.

    ``t_numeric`` is the root of the logarithmic derivative (accurate to
    machine precision); ``t_golden`` is a golden-section maximisation of the
    curve itself, whose accuracy is limited to about sqrt(eps) by the flat top.
    """
    if not delta > 0 or not beta > 0:
        raise ValueError("delta and beta must be positive")
    t_star = beta / np.pi * math.asinh(1.0 / math.sqrt(2 * delta))
    e_star = teleported_energy(1.0, delta, beta, t_star)

    hi = beta
    while _log_slope(hi, delta, beta) > 0:
        hi *= 2
    lo = hi
    while _log_slope(lo, delta, beta) < 0:
        lo /= 2
    t_num = scipy.optimize.brentq(_log_slope, lo, hi, args=(delta, beta), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    res = scipy.optimize.minimize_scalar(
        lambda t: -teleported_energy(1.0, delta, beta, t), bracket=(lo, t_num, 2 * hi), method="golden", tol=1e-12
    )
    return PeakTime(t_star, e_star, float(t_num), float(res.x))


# -- Majorana algebra ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MajoranaAlgebra:
    n_modes: int
    matrices: tuple

    @property
    def dim(self) -> int:
        return 2 ** (self.n_modes // 2)

    def parity(self) -> np.ndarray:
        """(2i)^{n/2} psi_1 psi_2 ... psi_n."""
        prod = reduce(np.matmul, self.matrices)
        return (2j) ** (self.n_modes // 2) * prod


def _jw(n_modes: int) -> list[np.ndarray]:
    n_q = n_modes // 2
    out = []
    for k in range(n_q):
        left = [_Z] * k
        right = [np.eye(2)] * (n_q - k - 1)
        for pauli in (_X, _Y):
            out.append(reduce(np.kron, left + [pauli] + right, np.eye(1)) / math.sqrt(2))
    return out


def majorana_algebra(n_modes: int) -> MajoranaAlgebra:
    """Jordan-Wigner Majoranas psi_{2k-1} = Z..Z X_k / sqrt2, psi_{2k} = Z..Z Y_k / sqrt2."""
    if n_modes < 2 or n_modes % 2:
        raise ValueError("number of Majorana modes must be a positive even integer")
    if n_modes > MAX_MODES:
        raise ValueError(f"at most {MAX_MODES} Majorana modes are supported")
    return MajoranaAlgebra(n_modes, tuple(_jw(n_modes)))


def syk_hamiltonian(n_modes: int, seed=None, coupling: float = 1.0) -> Hamiltonian:
    """Random 4-body Majorana Hamiltonian sum J_ijkl psi_i psi_j psi_k psi_l.

    Couplings are Gaussian with variance 3! J^2 / N^3.
    """
    if n_modes < 4:
        raise ValueError("a 4-body Hamiltonian needs at least 4 Majoranas")
    alg = majorana_algebra(n_modes)
    rng = as_rng(seed)
    sd = math.sqrt(6.0 * coupling**2 / n_modes**3)
    m = np.zeros((alg.dim, alg.dim), dtype=complex)
    for idx in itertools.combinations(range(n_modes), 4):
        a, b, c, d = (alg.matrices[i] for i in idx)
        m += rng.normal(0.0, sd) * (a @ b @ c @ d)
    return Hamiltonian(m)


# -- two-sided register ------------------------------------------------------------


@dataclass(eq=False)
class TwoSidedRegister:
    """System plus auxiliary Majoranas on both sides, with local and global operators."""

    n_sys: int
    K: int
    aux_mode: str
    chi_a: list = field(init=False)
    chi_b: list = field(init=False)
    n_aux: int = field(init=False)

    def __post_init__(self):
        if self.aux_mode not in AUX_MODES:
            raise ValueError(f"aux_mode must be one of {AUX_MODES}")
        if self.n_sys < 2 or self.n_sys % 2:
            raise ValueError("n_sys must be a positive even integer")
        if not 1 <= self.K <= min(MAX_PAIRS, self.n_sys):
            raise ValueError(f"K must lie in 1..{min(MAX_PAIRS, self.n_sys)}")
        aux = self.K if self.aux_mode == "per_pair" else 1
        self.n_aux = aux + aux % 2  # a spectator keeps the count even
        if self.side_dim > MAX_SIDE_DIM:
            raise ValueError(f"per-side dimension {self.side_dim} exceeds {MAX_SIDE_DIM}")
        side = majorana_algebra(self.n_sys + self.n_aux).matrices
        self.chi_a = list(side)  # [sys][aux]
        self.chi_b = list(side)  # [aux][sys]; same matrices, relabelled below

    @property
    def side_dim(self) -> int:
        return 2 ** ((self.n_sys + self.n_aux) // 2)

    @property
    def sys_dim(self) -> int:
        return 2 ** (self.n_sys // 2)

    @property
    def aux_dim(self) -> int:
        return 2 ** (self.n_aux // 2)

    # local operators (side_dim x side_dim)
    def a_sys(self, i: int) -> np.ndarray:
        return self.chi_a[i]

    def a_aux(self, j: int) -> np.ndarray:
        return self.chi_a[self.n_sys + j]

    def b_aux(self, j: int) -> np.ndarray:
        return self.chi_b[j]

    def b_sys(self, i: int) -> np.ndarray:
        return self.chi_b[self.n_aux + i]

    def aux_index(self, i: int) -> int:
        return i if self.aux_mode == "per_pair" else 0

    @property
    def parity_a(self) -> np.ndarray:
        return reduce(np.kron, [_Z] * ((self.n_sys + self.n_aux) // 2), np.eye(1))

    # global operators on A (x) B
    def global_a(self, op) -> sp.csr_matrix:
        return sp.kron(sp.csr_matrix(op), sp.identity(self.side_dim), format="csr")

    def global_b_majorana(self, op) -> sp.csr_matrix:
        return sp.kron(sp.csr_matrix(self.parity_a), sp.csr_matrix(op), format="csr")

    def b_hamiltonian(self, h_sys) -> np.ndarray:
        """An even system operator on Bob's [aux][sys] chain."""
        return np.kron(np.eye(self.aux_dim), np.asarray(h_sys))

    def a_projector(self, i: int, s: int) -> np.ndarray:
        """Projector onto the kernel of psi_i^A + s i psi_0^A (s = +1 or -1)."""
        bil = self.a_sys(i) @ self.a_aux(self.aux_index(i))
        return 0.5 * (np.eye(self.side_dim) - s * 2j * bil)

    def b_bilinear(self, i: int) -> np.ndarray:
        """psi_0^B psi_i^B on Bob's side."""
        return self.b_aux(self.aux_index(i)) @ self.b_sys(i)

    def b_unitary(self, i: int, s: int, g: float) -> np.ndarray:
        """exp(-s (g/K) psi_0^B psi_i^B); the bilinear squares to -1/4."""
        theta = -s * g / self.K
        return math.cos(theta / 2) * np.eye(self.side_dim) + 2 * math.sin(theta / 2) * self.b_bilinear(i)

    def coupling(self) -> sp.csr_matrix:
        """Hermitian V = (i/K) sum_i psi_i^A psi_i^B on A (x) B."""
        terms = [self.global_a(self.a_sys(i)) @ self.global_b_majorana(self.b_sys(i)) for i in range(self.K)]
        return (1j / self.K) * sum(terms[1:], terms[0])

    def quartic_sum(self) -> sp.csr_matrix:
        """sum_i psi_i^A psi_i^B psi_0^A psi_0^B."""
        out = None
        for i in range(self.K):
            j = self.aux_index(i)
            q = (
                self.global_a(self.a_sys(i))
                @ self.global_b_majorana(self.b_sys(i))
                @ self.global_a(self.a_aux(j))
                @ self.global_b_majorana(self.b_aux(j))
            )
            out = q if out is None else out + q
        return out

    def epr_annihilators(self) -> list[sp.csr_matrix]:
        return [
            self.global_a(self.a_aux(j)) + 1j * self.global_b_majorana(self.b_aux(j)) for j in range(self.n_aux)
        ]

    def aux_epr(self) -> tuple[np.ndarray, int]:
        """Auxiliary state annihilated by every psi_{0j}^A + i psi_{0j}^B, and the kernel dimension."""
        q = self.n_aux // 2
        chain = _jw(2 * self.n_aux)  # A-aux qubits then B-aux qubits
        stacked = np.vstack([chain[j] + 1j * chain[self.n_aux + j] for j in range(self.n_aux)])
        null = scipy.linalg.null_space(stacked, rcond=1e-10)
        vec = null[:, 0]
        k = np.flatnonzero(np.abs(vec) > 1e-8)[0]
        vec = vec * (abs(vec[k]) / vec[k])
        assert vec.size == 4**q
        return vec, null.shape[1]

    def aux_parity(self) -> int:
        """Eigenvalue of Z..Z over the auxiliary qubits on the EPR state."""
        e, _ = self.aux_epr()
        z = np.diag(reduce(np.kron, [_Z] * self.n_aux, np.eye(1))).real
        return int(round(float(z @ np.abs(e) ** 2)))

    def tfd(self, h: Hamiltonian, beta: float) -> np.ndarray:
        """Fermionic thermofield double v[a_sys, b_sys] of Bob's system Hamiltonian.

        The infinite-temperature state is fixed by (psi_j^A - i psi_j^B)|.> = 0
        for every system Majorana, the pairing for which g > 0 extracts
        energy from Bob at t > 0. Bob's factor e^{-beta h/2} then makes his
        marginal exactly Gibbs. The auxiliary parity enters because Bob's
        system Majoranas carry a string through the auxiliary qubits.
        """
        if h.dim != self.sys_dim:
            raise ValueError(f"Hamiltonian dimension {h.dim} does not match {self.n_sys} Majoranas")
        sign = self.aux_parity()
        chain = _jw(2 * self.n_sys)  # A-sys qubits then B-sys qubits
        stacked = np.vstack([chain[j] - 1j * sign * chain[self.n_sys + j] for j in range(self.n_sys)])
        null = scipy.linalg.null_space(stacked, rcond=1e-10)
        if null.shape[1] != 1:
            raise RuntimeError(f"system EPR kernel has dimension {null.shape[1]}")
        v = null[:, 0].reshape(self.sys_dim, self.sys_dim)
        p, _ = gibbs_weights(h.energies, beta)
        half = (h.basis * np.sqrt(p)) @ h.basis.conj().T  # sqrt(tau), i.e. e^{-beta h/2}/sqrt(Z)
        v = v @ half.T
        return v / np.linalg.norm(v)

    def embed(self, v_sys: np.ndarray) -> tuple[np.ndarray, int]:
        """Global ket v[a_sys, b_sys] e[a_aux, b_aux] as a (side_dim, side_dim) matrix."""
        e, kdim = self.aux_epr()
        v = np.asarray(v_sys, dtype=complex).reshape(self.sys_dim, self.sys_dim)
        e = e.reshape(self.aux_dim, self.aux_dim)
        psi = np.einsum("ij,kl->iklj", v, e)  # (a_sys, a_aux, b_aux, b_sys)
        return psi.reshape(self.side_dim, self.side_dim), kdim


def _marginal_b(psi: np.ndarray) -> np.ndarray:
    return psi.T @ psi.conj()


def _outcome_strings(K: int):
    return list(itertools.product((1, -1), repeat=K))


def _locc_terms(reg: TwoSidedRegister, psi: np.ndarray, g: float, order, b_frame=None):
    """Yield (signs, p_x, branch) for the sequential-measurement channel.

    ``b_frame`` (a unitary on Bob's register) conjugates Bob's corrections,
    U_x(t) = F U_x F^dag.
    """
    for signs in _outcome_strings(reg.K):
        branch = psi
        for i in order:
            branch = reg.a_projector(i, signs[i]) @ branch
        p = float(np.vdot(branch, branch).real)
        u = np.eye(reg.side_dim, dtype=complex)
        for i in order:
            u = reg.b_unitary(i, signs[i], g) @ u
        if b_frame is not None:
            u = b_frame @ u @ b_frame.conj().T
        yield signs, p, branch @ u.T


@dataclass
class LOCCReport:
    K: int
    g: float
    aux_mode: str
    order: list
    trace_distance: float
    probs: list
    prob_sum: float
    kernel_dim: int
    annihilation_error: float
    quartic_form_error: float
    unitarity_error: float
    state_spec: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "g": self.g,
            "aux_mode": self.aux_mode,
            "order": self.order,
            "state_spec": self.state_spec,
            "trace_distance": self.trace_distance,
            "probs": self.probs,
            "prob_sum": self.prob_sum,
            "kernel_dim": self.kernel_dim,
            "annihilation_error": self.annihilation_error,
            "quartic_form_error": self.quartic_form_error,
            "unitarity_error": self.unitarity_error,
        }


def system_state(state: str, reg: TwoSidedRegister, seed=None, beta: float = 1.0):
    """``"random"``: Haar-random pure state of both system registers; ``"tfd"``: TFD of a seeded SYK model.

    Returns (v[a_sys, b_sys], Hamiltonian or None).
    """
    if state == "random":
        return random_ket(reg.sys_dim**2, seed).reshape(reg.sys_dim, reg.sys_dim), None
    if state == "tfd":
        h = syk_hamiltonian(reg.n_sys, seed)
        return reg.tfd(h, beta), h
    raise ValueError(f"unknown state {state!r}; expected 'random' or 'tfd'")


def locc_equivalence(
    K: int,
    g: float,
    state: str = "random",
    beta: float = 1.0,
    seed=0,
    order=None,
    aux_mode: str = "per_pair",
    n_sys: int = 6,
) -> LOCCReport:
    """Compare Bob's state after the coupling with Bob's state after the LOCC channel."""
    reg = TwoSidedRegister(n_sys, K, aux_mode)
    order = list(range(K)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(K)):
        raise ValueError(f"order must be a permutation of 0..{K - 1}")
    v, _ = system_state(state, reg, seed, beta)
    psi, kdim = reg.embed(v)
    vec = psi.reshape(-1)
    annih = max(float(np.abs(c @ vec).max()) for c in reg.epr_annihilators())

    coupled = expm_multiply(1j * g * reg.coupling(), vec)
    quartic = expm_multiply(1j * (2 * g / K) * reg.quartic_sum(), vec)
    rho_1 = _marginal_b(coupled.reshape(psi.shape))

    rho_2 = np.zeros_like(rho_1)
    probs = []
    for _, p, branch in _locc_terms(reg, psi, g, order):
        probs.append(p)
        rho_2 += _marginal_b(branch)

    spec = {"state": state, "seed": seed, "n_sys": n_sys}
    if state == "tfd":
        spec["beta"] = beta
    return LOCCReport(
        K=K,
        g=float(g),
        aux_mode=aux_mode,
        order=order,
        trace_distance=trace_distance(rho_1, rho_2),
        probs=probs,
        prob_sum=float(sum(probs)),
        kernel_dim=kdim,
        annihilation_error=annih,
        quartic_form_error=float(np.abs(coupled - quartic).max()),
        unitarity_error=abs(float(np.linalg.norm(coupled)) - 1.0),
        state_spec=spec,
    )


# -- energy extracted by the LOCC channel --------------------------------------------


def _gain_setup(K, h, beta, seed, aux_mode, n_sys):
    reg = TwoSidedRegister(n_sys, K, aux_mode)
    if h is None:
        h = syk_hamiltonian(n_sys, seed)
    if h.dim != reg.sys_dim:
        raise ValueError(f"Hamiltonian dimension {h.dim} does not match {n_sys} Majoranas")
    psi, _ = reg.embed(reg.tfd(h, beta))
    hb = reg.b_hamiltonian(h.matrix)
    return reg, h, psi, hb


def deformation_energy_gain(
    K: int,
    g: float,
    h: Hamiltonian | None = None,
    beta: float = 1.0,
    t_delay: float = 0.0,
    seed=0,
    aux_mode: str = "per_pair",
    n_sys: int = 6,
) -> float:
    """sum_x p_x Tr h (rho_x - U_x(t) rho_x U_x(t)^dag) on the TFD, U_x(t) = e^{iht} U_x e^{-iht}."""
    reg, h, psi, hb = _gain_setup(K, h, beta, seed, aux_mode, n_sys)
    frame = scipy.linalg.expm(1j * t_delay * hb)
    before = float(np.real(np.trace(hb @ _marginal_b(psi))))
    after = 0.0
    for _, _, branch in _locc_terms(reg, psi, g, list(range(K)), frame):
        after += float(np.real(np.trace(hb @ _marginal_b(branch))))
    return before - after


def energy_gain_slope(
    K: int,
    h: Hamiltonian | None = None,
    beta: float = 1.0,
    t_delay: float = 0.0,
    seed=0,
    aux_mode: str = "per_pair",
    n_sys: int = 6,
) -> float:
    """d(gain)/dg at g = 0: (1/K) sum_i < M_i (x) [h, b_i(t)] >, M_i = P_{i,+} - P_{i,-}."""
    reg, h, psi, hb = _gain_setup(K, h, beta, seed, aux_mode, n_sys)
    frame = scipy.linalg.expm(1j * t_delay * hb)
    total = 0.0
    for i in range(K):
        m = reg.a_projector(i, 1) - reg.a_projector(i, -1)
        b_t = frame @ reg.b_bilinear(i) @ frame.conj().T
        comm = hb @ b_t - b_t @ hb
        total += complex(np.vdot(psi, m @ psi @ comm.T)).real
    return total / K
