"""Dense complex linear algebra on small Hilbert spaces.

Everything here works on plain ``numpy`` arrays. :class:`DensityMatrix` is a
thin validated wrapper that caches its spectrum, because almost every
downstream quantity (entropies, ergotropy, matrix functions) needs it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import NamedTuple, Sequence

import numpy as np

SUPPORT_CUTOFF = 1e-12  # relative to the largest eigenvalue
PSD_TOL = 1e-10
HERMITIAN_TOL = 1e-8
STATE_TOL = 1e-10


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending, real
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


class Distances(NamedTuple):
    trace_distance: float
    fidelity: float
    purified_distance: float


def as_matrix(m) -> np.ndarray:
    if isinstance(m, DensityMatrix):
        return m.matrix
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def kron(*mats) -> np.ndarray:
    """Kronecker product of any number of matrices (or vectors)."""
    if not mats:
        raise ValueError("kron needs at least one argument")
    return reduce(np.kron, [np.asarray(m, dtype=complex) for m in mats])


def partial_trace(m, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every tensor factor of ``m`` not listed in ``keep``.

    ``dims`` lists the factor dimensions in kron order. Kept factors stay in
    their original order regardless of the order given in ``keep``.
    """
    m = as_matrix(m)
    dims = [int(d) for d in dims]
    n = int(np.prod(dims))
    if m.shape != (n, n):
        raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} factors")
    nf = len(dims)
    t = m.reshape(dims + dims)
    # traced factors share their row and column label
    row = list(range(nf))
    col = [nf + k if k in keep else k for k in range(nf)]
    out = keep + [nf + k for k in keep]
    r = np.einsum(t, row + col, out)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return r.reshape(dk, dk)


def ket_partial_trace(psi, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of a pure state without forming |psi><psi|."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    dims = [int(d) for d in dims]
    if psi.size != int(np.prod(dims)):
        raise ValueError(f"vector of length {psi.size} does not match dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    traced = [k for k in range(len(dims)) if k not in keep]
    t = np.transpose(psi.reshape(dims), keep + traced)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    a = t.reshape(dk, -1)
    return a @ a.conj().T


def hermitian_part(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix is not square: {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return 0.5 * (m + m.conj().T)


def _fix_phases(v: np.ndarray) -> np.ndarray:
    # first component above noise made real positive, column by column
    idx = np.argmax(np.abs(v) > 1e-12, axis=0)
    lead = v[idx, np.arange(v.shape[1])]
    ph = np.where(np.abs(lead) > 0, lead / np.abs(lead), 1.0)
    return v / ph


def eig_hermitian(m) -> SpectralDecomposition:
    """Ascending eigenpairs of a Hermitian matrix with a fixed phase convention."""
    h = hermitian_part(m)
    w, v = np.linalg.eigh(h)
    return SpectralDecomposition(w, _fix_phases(v))


def _clamp_psd(w: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and w.min() < -PSD_TOL * scale:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    return np.clip(w, 0.0, None)


def support_mask(w: np.ndarray) -> np.ndarray:
    top = float(np.max(w)) if w.size else 0.0
    return w > SUPPORT_CUTOFF * max(top, 0.0)


def apply_spectral(w: np.ndarray, f: str) -> np.ndarray:
    """Evaluate a matrix-function tag on an array of eigenvalues."""
    if f == "exp":
        return np.exp(w)
    w = _clamp_psd(w)
    if f == "sqrt":
        return np.sqrt(w)
    on = support_mask(w)
    out = np.zeros_like(w)
    if f == "log":
        out[on] = np.log(w[on])
    elif f == "inv_sqrt":
        out[on] = 1.0 / np.sqrt(w[on])
    elif f == "inv":
        out[on] = 1.0 / w[on]
    else:
        raise ValueError(f"unknown matrix function {f!r}")
    return out


def matrix_func_psd(m, f: str) -> np.ndarray:
    """Apply ``f`` in {sqrt, log, exp, inv_sqrt, inv} through the spectrum.

    ``log``, ``inv_sqrt`` and ``inv`` act only on the support (eigenvalues
    above ``SUPPORT_CUTOFF`` times the largest one); the kernel maps to 0.
    ``exp`` accepts any Hermitian input.
    """
    if isinstance(m, DensityMatrix):
        w, v = m.spectrum
    else:
        w, v = eig_hermitian(m)
    fw = apply_spectral(w, f)
    return (v * fw) @ v.conj().T


def trace_norm(m) -> float:
    return float(np.abs(np.linalg.eigvalsh(hermitian_part(m))).sum())


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(sigma) rho sqrt(sigma)))**2."""
    a, b = as_matrix(rho), as_matrix(sigma)
    rs = matrix_func_psd(b, "sqrt")
    inner = np.linalg.eigvalsh(hermitian_part(rs @ a @ rs, tol=1e-6))
    f = float(np.sqrt(np.clip(inner, 0.0, None)).sum() ** 2)
    return min(max(f, 0.0), 1.0)


def distances(rho, sigma) -> Distances:
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    td = min(max(0.5 * trace_norm(a - b), 0.0), 1.0)
    f = fidelity(a, b)
    return Distances(td, f, float(np.sqrt(max(0.0, 1.0 - f))))


def trace_distance(rho, sigma) -> float:
    return distances(rho, sigma).trace_distance


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-random ``d x d`` unitary (QR of a Ginibre matrix, phases of R fixed)."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    rng = as_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def random_density_matrix(d: int, seed=None, rank: int | None = None) -> np.ndarray:
    """Random mixed state from the induced (Hilbert-Schmidt for full rank) measure."""
    rng = as_rng(seed)
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_ket(d: int, seed=None) -> np.ndarray:
    rng = as_rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_hermitian(d: int, seed=None) -> np.ndarray:
    rng = as_rng(seed)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def is_unitary(u, tol: float = 1e-10) -> bool:
    u = as_matrix(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0) <= tol)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated quantum state: Hermitian, PSD and unit trace within ``STATE_TOL``."""

    matrix: np.ndarray
    dims: tuple[int, ...] = field(default=())
    known_spectrum: SpectralDecomposition | None = field(default=None, repr=False)

    def __post_init__(self):
        m = hermitian_part(self.matrix, tol=STATE_TOL)
        n = m.shape[0]
        dims = tuple(int(d) for d in self.dims) or (n,)
        if int(np.prod(dims)) != n:
            raise ValueError(f"dims {dims} do not multiply to matrix side {n}")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise ValueError(f"trace is {tr!r}, expected 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        if self.known_spectrum is not None:
            # trusted exact decomposition (e.g. Gibbs weights); skips the eigensolver round trip
            w, v = self.known_spectrum
            if w.shape != (n,) or v.shape != (n, n) or np.any(np.diff(w) < 0):
                raise ValueError("known spectrum must be ascending eigenvalues with a matching basis")
            self.__dict__["spectrum"] = SpectralDecomposition(np.asarray(w, dtype=float), np.asarray(v))
        if self.spectrum.eigenvalues.min() < -STATE_TOL:
            raise ValueError("density matrix has negative eigenvalues")

    @classmethod
    def from_ket(cls, psi, dims: Sequence[int] = ()) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        return cls(projector(psi / np.linalg.norm(psi)), tuple(dims))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d, dtype=complex) / d)

    @cached_property
    def spectrum(self) -> SpectralDecomposition:
        return eig_hermitian(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.clip(self.spectrum.eigenvalues, 0.0, None)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def ptrace(self, keep: Sequence[int]) -> "DensityMatrix":
        keep = sorted(keep)
        r = partial_trace(self.matrix, self.dims, keep)
        return DensityMatrix(r / np.trace(r).real, tuple(self.dims[k] for k in keep))

    def expect(self, op) -> float:
        return float(np.real(np.trace(as_matrix(op) @ self.matrix)))

    def conjugate_by(self, u) -> "DensityMatrix":
        u = as_matrix(u)
        return DensityMatrix(u @ self.matrix @ u.conj().T, self.dims)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.matrix, other.matrix), self.dims + other.dims)


def matrix_to_json(m) -> dict:
    a = np.asarray(m, dtype=complex)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "re": [float(x) for x in a.real.ravel()],
        "im": [float(x) for x in a.imag.ravel()],
    }


def matrix_from_json(obj) -> np.ndarray:
    if isinstance(obj, str):
        obj = json.loads(obj)
    rows, cols = int(obj["rows"]), int(obj["cols"])
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", [0.0] * re.size), dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {re.size} real / {im.size} imaginary")
    out = (re + 1j * im).reshape(rows, cols)
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix has non-finite entries")
    return out
