"""Joint energy/information teleportation on a bipartite pure resource.

Layout: the resource |psi>_{AB} is stored A-index major, the reference pair
|Phi>_{A'R} = sum_k |k>|k>/sqrt(d), and measurement vectors live on A (x) A'
(A-index major). All transposes are taken in this computational basis, the
one in which |I> = sum_k |k>|k> is declared.

Bob's conditional states come out of one contraction: for a measurement
vector V[a, a'] the unnormalised R-B amplitude is W[b, r] = (M^T conj(V))[b, r]
/ sqrt(d), where M[a, b] are the resource amplitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .entropy import entropies_from_spectra
from .linalg import haar_unitary, matrix_to_json
from .thermal import Hamiltonian, TFDState

COMPLETENESS_TOL = 1e-9
NEGLIGIBLE_P = 1e-14

RANK_ONE = "rank_one_projective"
KRAUS = "kraus_instrument"


# -- measurement schemes ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasurementScheme:
    """Alice's measurement on A (x) A'.

    Rank-one schemes keep the measurement vectors as rows of ``vectors``;
    Kraus instruments keep a stack of operators in ``kraus``.
    """

    kind: str
    dims: tuple[int, int]
    vectors: np.ndarray | None = None
    kraus: np.ndarray | None = None
    family: str = "explicit"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        da, dr = self.dims
        n = da * dr
        if self.kind == RANK_ONE:
            v = np.asarray(self.vectors, dtype=complex)
            if v.ndim != 2 or v.shape[1] != n:
                raise ValueError(f"measurement vectors must have shape (m, {n}), got {v.shape}")
            err = np.abs(v.T @ v.conj() - np.eye(n)).max()
            object.__setattr__(self, "vectors", v)
        elif self.kind == KRAUS:
            k = np.asarray(self.kraus, dtype=complex)
            if k.ndim != 3 or k.shape[1:] != (n, n):
                raise ValueError(f"Kraus operators must have shape (m, {n}, {n}), got {k.shape}")
            err = np.abs(np.einsum("xji,xjk->ik", k.conj(), k) - np.eye(n)).max()
            object.__setattr__(self, "kraus", k)
        else:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if err > COMPLETENESS_TOL:
            raise ValueError(f"measurement is not complete (deviation {err:.2e})")

    @property
    def n_outcomes(self) -> int:
        return len(self.vectors) if self.kind == RANK_ONE else len(self.kraus)

    @property
    def operators(self) -> np.ndarray:
        """Measurement operators on A (x) A' (projectors for rank-one schemes)."""
        if self.kind == RANK_ONE:
            return np.einsum("xi,xj->xij", self.vectors, self.vectors.conj())
        return self.kraus

    @property
    def povm(self) -> np.ndarray:
        ops = self.operators
        return np.einsum("xji,xjk->xik", ops.conj(), ops)


def bell_state(d: int) -> np.ndarray:
    """(1/sqrt d) sum_k |k>|k> on A' (x) R."""
    if d < 2:
        raise ValueError("Bell state needs d >= 2")
    return np.eye(d, dtype=complex).reshape(-1) / math.sqrt(d)


def weyl_operators(d: int) -> list[np.ndarray]:
    """Heisenberg-Weyl basis X^j Z^k, ordered by j * d + k."""
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [
        np.linalg.matrix_power(shift, j) @ np.linalg.matrix_power(clock, k)
        for j in range(d)
        for k in range(d)
    ]


def bell_basis(d: int) -> np.ndarray:
    """Columns (I (x) P)|I>/sqrt(d) for the d^2 Weyl operators P."""
    cols = [np.kron(np.eye(d), p) @ np.eye(d).reshape(-1) / math.sqrt(d) for p in weyl_operators(d)]
    return np.stack(cols, axis=1)


def interpolation_generator(d: int) -> np.ndarray:
    """Hermitian G with exp(-i (pi/2) G) carrying the Bell basis onto the product basis.

    G = (2i/pi) log Q for Q = B^dag (principal branch), so exp(-i theta G)
    traces the one-parameter subgroup through Q.
    """
    b = bell_basis(d)
    q = b.conj().T
    t, z = scipy.linalg.schur(q, output="complex")
    phases = np.angle(np.diagonal(t))
    return -(2.0 / np.pi) * (z * phases) @ z.conj().T


def make_measurement(
    family: str,
    d: int,
    theta: float | None = None,
    seed=None,
    vectors=None,
    kraus=None,
    a_basis=None,
) -> MeasurementScheme:
    """Build a measurement family on A (x) A' with both factors of dimension d.

    ``a_basis`` (columns) rotates Alice's half of the product family; pass the
    conjugate energy basis to measure a TFD resource in its Schmidt basis.
    """
    dims = (d, d)
    if family == "bell":
        return MeasurementScheme(RANK_ONE, dims, vectors=bell_basis(d).T, family="bell")
    if family == "product":
        basis = np.eye(d * d, dtype=complex)
        if a_basis is not None:
            basis = np.kron(np.asarray(a_basis, dtype=complex), np.eye(d))
        return MeasurementScheme(RANK_ONE, dims, vectors=basis.T, family="product")
    if family == "interpolated":
        if theta is None or not 0.0 <= theta <= math.pi / 2 + 1e-12:
            raise ValueError("interpolated family needs theta in [0, pi/2]")
        g = interpolation_generator(d)
        rot = scipy.linalg.expm(-1j * theta * g)
        meta = {"theta": float(theta), "generator": matrix_to_json(g)}
        return MeasurementScheme(
            RANK_ONE, dims, vectors=(rot @ bell_basis(d)).T, family="interpolated", metadata=meta
        )
    if family == "haar":
        u = haar_unitary(d * d, seed)
        return MeasurementScheme(RANK_ONE, dims, vectors=u.T, family="haar", metadata={"seed": seed})
    if family == "explicit":
        if vectors is not None:
            return MeasurementScheme(RANK_ONE, dims, vectors=vectors)
        if kraus is not None:
            return MeasurementScheme(KRAUS, dims, kraus=kraus)
        raise ValueError("explicit family needs measurement vectors or Kraus operators")
    raise ValueError(f"unknown measurement family {family!r}")


def coarse_grain(scheme: MeasurementScheme, group_size: int, seed=None) -> MeasurementScheme:
    """Merge consecutive rank-one outcomes into rank-``group_size`` Kraus operators.

    With a seed, each merged projector is followed by a Haar unitary on A (x) A',
    so the Kraus operators are not projectors.
    """
    if scheme.kind != RANK_ONE:
        raise ValueError("only rank-one schemes can be coarse-grained")
    m = scheme.n_outcomes
    if m % group_size:
        raise ValueError(f"{m} outcomes cannot be split into groups of {group_size}")
    v = scheme.vectors.reshape(m // group_size, group_size, -1)
    ops = np.einsum("gki,gkj->gij", v, v.conj())
    if seed is not None:
        rng = np.random.default_rng(seed)
        n = ops.shape[1]
        ops = np.stack([haar_unitary(n, rng) @ op for op in ops])
    return MeasurementScheme(
        KRAUS,
        scheme.dims,
        kraus=ops,
        family=f"{scheme.family}/rank{group_size}",
        metadata={**scheme.metadata, "group_size": group_size},
    )


def tensor_scheme(schemes: Sequence[MeasurementScheme]) -> MeasurementScheme:
    """Product of per-copy rank-one schemes, regrouped from (A1 A1')(A2 A2').. to (A1 A2..)(A1' A2'..)."""
    if any(s.kind != RANK_ONE for s in schemes):
        raise ValueError("tensor_scheme takes rank-one schemes")
    n = len(schemes)
    d = schemes[0].dims[0]
    vec = schemes[0].vectors
    for s in schemes[1:]:
        vec = np.einsum("xi,yj->xyij", vec, s.vectors).reshape(vec.shape[0] * s.n_outcomes, -1)
    m = vec.shape[0]
    perm = [0] + [1 + 2 * i for i in range(n)] + [2 + 2 * i for i in range(n)]
    vec = vec.reshape([m] + [d] * (2 * n)).transpose(perm).reshape(m, -1)
    fam = "x".join(s.family for s in schemes)
    return MeasurementScheme(RANK_ONE, (d**n, d**n), vectors=vec, family=fam, metadata={"copies": n})


# -- Schmidt form of measurement vectors and resources -------------------------


class SchmidtForm(NamedTuple):
    sigma: np.ndarray  # A-marginal of the vector; sigma / d' is the POVM element on A
    u: np.ndarray  # unitary on A'


def schmidt_split(v, dims: tuple[int, int]) -> SchmidtForm:
    """Write |v> = (sqrt(sigma) (x) U)|I> with sigma >= 0 on A and U unitary on A'."""
    da, dr = dims
    v = np.asarray(v, dtype=complex).reshape(da, dr)
    if da != dr:
        raise ValueError("Schmidt split needs equal factor dimensions")
    if np.linalg.norm(v) == 0.0:
        raise ValueError("cannot split the zero vector")
    x, s, yh = np.linalg.svd(v)
    sigma = (x * s**2) @ x.conj().T
    # V = sqrt(sigma) U^T  =>  U^T = X Y^dag on the full SVD
    u = (x @ yh).T
    return SchmidtForm(sigma, u)


def resource_schmidt(ket, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (U_A, rho_B) with |psi> = (U_A (x) sqrt(rho_B))|I>."""
    m = np.asarray(ket, dtype=complex).reshape(d, d)
    x, s, yh = np.linalg.svd(m)
    rho_b = m.T @ m.conj()
    return x @ yh, rho_b


def steering_povm(ket, scheme: MeasurementScheme) -> np.ndarray:
    """Bob-side POVM elements T_x with rho_x = sqrt(rho_B) T_x sqrt(rho_B) / p_x.

    Built from Schmidt forms: T_x = (U_A^dag sigma_x U_A)^T, sigma_x the POVM on A.
    """
    d = scheme.dims[0]
    u_a, _ = resource_schmidt(ket, d)
    if scheme.kind == RANK_ONE:
        sig = np.stack([schmidt_split(v, scheme.dims).sigma for v in scheme.vectors]) / scheme.dims[1]
    else:
        pov = scheme.povm.reshape(-1, d, scheme.dims[1], d, scheme.dims[1])
        sig = np.einsum("xajbj->xab", pov) / scheme.dims[1]
    return np.einsum("ia,xab,bj->xij", u_a.conj().T, sig, u_a).transpose(0, 2, 1)


# -- protocol execution ------------------------------------------------------------


class ProtocolOutcome(NamedTuple):
    x: int
    p: float
    rho: np.ndarray | None  # None when p < NEGLIGIBLE_P
    rb_state: np.ndarray | None  # pure vector on R (x) B (rank-one kind only)
    energy: float
    entropy: float


@dataclass(eq=False)
class ProtocolReport:
    """Per-outcome arrays of one protocol run plus ensemble averages."""

    p: np.ndarray
    rho: np.ndarray  # (m, d, d); NaN where not valid
    energy: np.ndarray
    entropy: np.ndarray
    valid: np.ndarray
    unitaries: np.ndarray
    rb_amplitudes: np.ndarray | None  # (m, d_B, d_R), unnormalised
    rho_rb: np.ndarray | None  # (m, d_R d_B, d_R d_B) normalised, Kraus kind only
    resource_marginal: np.ndarray
    hamiltonian: Hamiltonian
    scheme: MeasurementScheme
    decoder: str
    beta: float | None = None
    n_copies: int = 1
    metadata: dict = field(default_factory=dict)

    @property
    def avg_E(self) -> float:
        return float(self.p[self.valid] @ self.energy[self.valid])

    @property
    def avg_S(self) -> float:
        return float(self.p[self.valid] @ self.entropy[self.valid])

    @property
    def per_copy_E(self) -> float:
        return self.avg_E / self.n_copies

    @property
    def per_copy_S(self) -> float:
        return self.avg_S / self.n_copies

    @property
    def ensemble_average(self) -> np.ndarray:
        w = np.where(self.valid, self.p, 0.0)
        rho = np.where(self.valid[:, None, None], self.rho, 0.0)
        return np.einsum("x,xij->ij", w, rho)

    @property
    def ensemble_error(self) -> float:
        return float(np.abs(self.ensemble_average - self.resource_marginal).max())

    @property
    def entanglement_fidelity(self) -> float:
        """sum_x p_x |<Phi_RB| (1 (x) U_x)|psi_x>|^2, rank-one kind only."""
        if self.rb_amplitudes is None:
            return math.nan
        d = self.rb_amplitudes.shape[1]
        tr = np.einsum("xij,xji->x", self.unitaries, self.rb_amplitudes)
        return float((np.abs(tr[self.valid]) ** 2).sum() / d)

    @property
    def outcomes(self) -> list[ProtocolOutcome]:
        out = []
        for x in range(len(self.p)):
            ok = bool(self.valid[x])
            rb = None
            if ok and self.rb_amplitudes is not None:
                rb = (self.rb_amplitudes[x].T.reshape(-1)) / math.sqrt(self.p[x])
            out.append(
                ProtocolOutcome(
                    x,
                    float(self.p[x]),
                    self.rho[x] if ok else None,
                    rb,
                    float(self.energy[x]),
                    float(self.entropy[x]),
                )
            )
        return out


DECODERS = ("ergotropy_optimal", "none")


def _resource_ket(resource) -> tuple[np.ndarray, float | None]:
    if isinstance(resource, TFDState):
        return resource.ket, resource.beta
    return np.asarray(resource, dtype=complex).reshape(-1), None


def run_protocol(resource, h: Hamiltonian, scheme: MeasurementScheme, decoder="ergotropy_optimal") -> ProtocolReport:
    """Measure A A', steer Bob, decode, and book-keep every outcome.

    ``decoder`` is ``"ergotropy_optimal"``, ``"none"`` or a stack of unitaries
    on B (one per outcome).
    """
    ket, beta = _resource_ket(resource)
    d = h.dim
    if ket.size != d * d:
        raise ValueError(f"resource of length {ket.size} does not match a {d}x{d} system")
    if abs(np.linalg.norm(ket) - 1.0) > 1e-9:
        raise ValueError("resource state is not normalised")
    if scheme.dims != (d, d):
        raise ValueError(f"scheme acts on {scheme.dims}, resource needs ({d}, {d})")
    m_amp = ket.reshape(d, d)
    rho_b = m_amp.T @ m_amp.conj()

    rb_amp = rho_rb = None
    if scheme.kind == RANK_ONE:
        vecs = scheme.vectors.reshape(-1, d, d)
        # W_x[b, r] = sum_{a, a'} M[a, b] conj(V_x[a, a']) delta_{a' r} / sqrt(d)
        w = np.einsum("ab,xar->xbr", m_amp, vecs.conj()) / math.sqrt(d)
        p = np.einsum("xbr,xbr->x", w, w.conj()).real
        unnorm = np.einsum("xbr,xcr->xbc", w, w.conj())
        rb_amp = w
    else:
        # global amplitude Psi[(a a'), (b r)] = M[a, b] delta_{a' r} / sqrt(d)
        psi = np.einsum("ab,cr->acbr", m_amp, np.eye(d)).reshape(d * d, d * d) / math.sqrt(d)
        out = np.einsum("xij,jk->xik", scheme.kraus, psi)  # (x, AA', BR)
        p = np.einsum("xik,xik->x", out, out.conj()).real
        joint = np.einsum("xik,xil->xkl", out, out.conj())  # on B (x) R
        unnorm = np.einsum("xbrcr->xbc", joint.reshape(-1, d, d, d, d))
        with np.errstate(invalid="ignore", divide="ignore"):
            rho_rb = joint.reshape(-1, d, d, d, d).transpose(0, 2, 1, 4, 3).reshape(-1, d * d, d * d)
            rho_rb = rho_rb / np.where(p > NEGLIGIBLE_P, p, 1.0)[:, None, None]

    valid = p >= NEGLIGIBLE_P
    safe_p = np.where(valid, p, 1.0)
    rho = unnorm / safe_p[:, None, None]
    rho = 0.5 * (rho + rho.conj().transpose(0, 2, 1))
    rho[~valid] = np.nan

    evals, evecs = np.linalg.eigh(np.where(valid[:, None, None], rho, np.eye(d)))
    entropy = np.where(valid, entropies_from_spectra(evals), 0.0)
    mean_h = np.einsum("ij,xji->x", h.matrix, np.where(valid[:, None, None], rho, 0.0)).real

    if isinstance(decoder, str) and decoder == "ergotropy_optimal":
        pops = np.clip(evals[:, ::-1], 0.0, None)
        energy = mean_h - pops @ h.energies
        unitaries = np.einsum("ij,xkj->xik", h.basis, evecs[:, :, ::-1].conj())
    elif isinstance(decoder, str) and decoder == "none":
        energy = np.zeros_like(p)
        unitaries = np.broadcast_to(np.eye(d, dtype=complex), (len(p), d, d)).copy()
    elif isinstance(decoder, str):
        raise ValueError(f"unknown decoder {decoder!r}; expected one of {DECODERS} or unitaries")
    else:
        unitaries = np.asarray(decoder, dtype=complex)
        if unitaries.shape != (len(p), d, d):
            raise ValueError(f"decoder unitaries must have shape {(len(p), d, d)}")
        rotated = np.einsum("xij,xjk,xlk->xil", unitaries, np.where(valid[:, None, None], rho, 0.0), unitaries.conj())
        energy = mean_h - np.einsum("ij,xji->x", h.matrix, rotated).real
    energy = np.where(valid, energy, 0.0)

    label = decoder if isinstance(decoder, str) else "explicit"
    return ProtocolReport(
        p=p,
        rho=rho,
        energy=energy,
        entropy=entropy,
        valid=valid,
        unitaries=unitaries,
        rb_amplitudes=rb_amp,
        rho_rb=rho_rb,
        resource_marginal=rho_b,
        hamiltonian=h,
        scheme=scheme,
        decoder=label,
        beta=beta,
    )


def tensor_power_ket(ket, d: int, n: int) -> np.ndarray:
    """|psi>^{(x)n} regrouped from (A1 B1)(A2 B2).. to (A1 A2 ..)(B1 B2 ..)."""
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    out = ket
    for _ in range(n - 1):
        out = np.kron(out, ket)
    perm = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    return out.reshape([d] * (2 * n)).transpose(perm).reshape(-1)


MAX_MEASUREMENT_DIM = 256


def run_tensor_protocol(
    resource, h: Hamiltonian, n: int, scheme: MeasurementScheme, decoder="ergotropy_optimal"
) -> ProtocolReport:
    """Run the protocol on n copies of the resource with Bob's Hamiltonian sum_i H^(i).

    ``scheme`` acts on A^n (x) A'^n (grouped order).
    """
    ket, beta = _resource_ket(resource)
    d = h.dim
    if d ** (2 * n) > MAX_MEASUREMENT_DIM:
        raise ValueError(f"measurement dimension {d ** (2 * n)} exceeds {MAX_MEASUREMENT_DIM}")
    big = tensor_power_ket(ket, d, n)
    hn = h.tensor_sum(n) if n > 1 else h
    report = run_protocol(big, hn, scheme, decoder)
    report.n_copies = n
    report.beta = beta
    return report
