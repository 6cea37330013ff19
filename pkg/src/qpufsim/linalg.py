"""Complex linear algebra primitives shared by both QPUF models.

Everything here works on dense numpy arrays.  The small wrapper types
(``UnitaryMatrix``, ``PureState``, ``EigenSystem``) validate their invariants
once at construction and are read-only afterwards, so they can be shared
freely between trials.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractError, NumericalError

UNITARY_TOL = 1e-9
NORM_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-8
DEGENERACY_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def as_complex_matrix(m, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex array, optionally checking its shape."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ContractError(f"expected a matrix, got array of shape {a.shape}")
    if (rows is not None and a.shape[0] != rows) or (cols is not None and a.shape[1] != cols):
        raise ContractError(f"expected shape ({rows}, {cols}), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream: the same (master_seed, stream_index) pair
    always yields the same draws, independent of which worker asks for it."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ContractError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ContractError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(seq))


def unitarity_defect(m: np.ndarray) -> float:
    """Max-norm of ``m^dagger m - I``."""
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


@dataclass(frozen=True)
class UnitaryMatrix:
    matrix: np.ndarray
    unitarity_defect: float = field(init=False)

    def __post_init__(self):
        a = as_complex_matrix(self.matrix)
        if a.shape[0] != a.shape[1]:
            raise ContractError(f"unitary must be square, got {a.shape}")
        defect = unitarity_defect(a)
        if defect > UNITARY_TOL:
            raise ContractError(f"matrix is not unitary (defect {defect:.3e})")
        object.__setattr__(self, "matrix", _frozen(a))
        object.__setattr__(self, "unitarity_defect", defect)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def column(self, k: int) -> np.ndarray:
        return self.matrix[:, k]

    @classmethod
    def identity(cls, dim: int) -> "UnitaryMatrix":
        return cls(np.eye(dim))

    @classmethod
    def diagonal(cls, phases_rad) -> "UnitaryMatrix":
        return cls(np.diag(np.exp(1j * np.asarray(phases_rad, dtype=float))))


class Basis(enum.Enum):
    STANDARD = "standard"
    EIGEN = "eigenbasis"


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    basis: Basis = Basis.STANDARD

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.complex128)
        if a.ndim != 1 or a.size == 0:
            raise ContractError(f"state must be a non-empty vector, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ContractError("state has non-finite amplitudes")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > NORM_TOL:
            raise ContractError(f"state is not normalized (norm {norm:.12f})")
        object.__setattr__(self, "amplitudes", _frozen(a))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def basis_state(cls, dim: int, k: int, basis: Basis = Basis.STANDARD) -> "PureState":
        a = np.zeros(dim, dtype=np.complex128)
        a[k] = 1.0
        return cls(a, basis)

    @classmethod
    def normalized(cls, vec, basis: Basis = Basis.STANDARD) -> "PureState":
        v = np.asarray(vec, dtype=np.complex128)
        return cls(v / np.linalg.norm(v), basis)


@dataclass(frozen=True)
class EigenSystem:
    """Spectral data of a unitary with phases in units of the d-cycle.

    Column ``j`` of ``eigenvectors`` has eigenvalue ``exp(2j*pi*phases[j]/d)``.
    """

    phases: np.ndarray
    eigenvectors: np.ndarray
    ancilla_dim: int

    def __post_init__(self):
        ph = np.array(self.phases, dtype=float, copy=True)
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "eigenvectors", _frozen(self.eigenvectors))
        if self.eigenvectors.shape != (ph.size, ph.size):
            raise ContractError("eigenvector matrix does not match number of phases")
        if np.any(ph < 0) or np.any(ph >= self.ancilla_dim):
            raise ContractError("phases must lie in [0, d)")

    @property
    def dim(self) -> int:
        return self.phases.size

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(2j * np.pi * self.phases / self.ancilla_dim)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def to_eigenbasis(self, state: PureState) -> PureState:
        if state.basis is not Basis.STANDARD:
            raise ContractError("expected a standard-basis state")
        return PureState(self.eigenvectors.conj().T @ state.amplitudes, Basis.EIGEN)

    def to_standard(self, state: PureState) -> PureState:
        if state.basis is not Basis.EIGEN:
            raise ContractError("expected an eigenbasis state")
        return PureState(self.eigenvectors @ state.amplitudes, Basis.STANDARD)


# -- sampling -----------------------------------------------------------------

def _ginibre(dim: int, rng: np.random.Generator, shape=None) -> np.ndarray:
    shape = (dim, dim) if shape is None else shape
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def haar_unitary(dim: int, rng: np.random.Generator) -> UnitaryMatrix:
    """Haar-random unitary via QR of a Ginibre matrix.

    The columns of Q are rescaled by the phases of diag(R); without this the
    distribution is not Haar (Mezzadri 2007).
    """
    if dim < 1:
        raise ContractError("dimension must be positive")
    while True:
        z = _ginibre(dim, rng)
        q, r = np.linalg.qr(z)
        diag = np.diagonal(r)
        mags = np.abs(diag)
        if np.all(mags > 1e-12):
            return UnitaryMatrix(q * (diag / mags))


def random_pure_state(dim: int, rng: np.random.Generator, basis: Basis = Basis.STANDARD) -> PureState:
    if dim < 1:
        raise ContractError("dimension must be positive")
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState(v / np.linalg.norm(v), basis)


def haar_unitary_gram_schmidt(dim: int, rng: np.random.Generator) -> UnitaryMatrix:
    """Haar-random unitary built column by column.

    Each new column is a uniformly random unit vector from the orthogonal
    complement of the columns chosen so far.
    """
    if dim < 1:
        raise ContractError("dimension must be positive")
    cols = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(dim):
        while True:
            v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            prev = cols[:, :j]
            # two passes of classical Gram-Schmidt keep the columns orthogonal to ~eps
            v = v - prev @ (prev.conj().T @ v)
            v = v - prev @ (prev.conj().T @ v)
            n = np.linalg.norm(v)
            if n > 1e-10:
                break
        cols[:, j] = v / n
    return UnitaryMatrix(cols)


def random_state_in_complement(known: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vector orthogonal to the orthonormal columns of ``known``."""
    dim, k = known.shape
    if k >= dim:
        raise ContractError("complement of the known columns is empty")
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    for _ in range(2):
        v = v - known @ (known.conj().T @ v)
    return v / np.linalg.norm(v)


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from an (unnormalized) probability vector.

    Zero-mass entries can never be selected: a single uniform picks the first
    index whose cumulative mass strictly exceeds it.
    """
    cdf = np.cumsum(probs)
    total = cdf[-1]
    if not total > 0:
        raise NumericalError("probability vector has no mass")
    u = rng.random() * total
    k = int(np.searchsorted(cdf, u, side="right"))
    if k >= len(probs):
        k = int(np.flatnonzero(probs > 0)[-1])
    return k


# -- spectral decomposition -------------------------------------------------

def _phases_from_eigenvalues(w: np.ndarray, d: int) -> np.ndarray:
    phases = np.angle(w) * d / (2 * np.pi)
    phases = np.where(phases < 0, phases + d, phases)
    # angle() can return -0.0 or a value rounding onto d
    phases = np.where(phases >= d, phases - d, phases)
    return np.abs(phases)


def _circular_clusters(phases: np.ndarray, d: int, tol: float) -> list[np.ndarray]:
    order = np.argsort(phases)
    groups = [[order[0]]]
    for a, b in zip(order[:-1], order[1:]):
        if phases[b] - phases[a] <= tol:
            groups[-1].append(b)
        else:
            groups.append([b])
    if len(groups) > 1 and phases[order[0]] + d - phases[order[-1]] <= tol:
        groups[0] = groups.pop() + groups[0]
    return [np.array(g) for g in groups]


def eigensystem_unitary(u: UnitaryMatrix, ancilla_dim: int) -> EigenSystem:
    """Eigendecomposition of ``u`` with phases ``(d/2pi) arg(lambda)`` in [0, d).

    Eigenvectors inside (numerically) degenerate clusters are re-orthonormalized;
    if the basis is still not orthonormal a complex Schur factorization is used
    instead, which is unitary by construction for normal matrices.
    """
    d = int(ancilla_dim)
    if d < 2:
        raise ContractError("ancilla dimension must be at least 2")
    m = u.matrix
    w, v = np.linalg.eig(m)
    phases = _phases_from_eigenvalues(w, d)
    for cluster in _circular_clusters(phases, d, DEGENERACY_TOL):
        if cluster.size > 1:
            q, _ = np.linalg.qr(v[:, cluster])
            v[:, cluster] = q
    if np.max(np.abs(v.conj().T @ v - np.eye(u.dim))) > UNITARY_TOL:
        t, v = scipy.linalg.schur(m, output="complex")
        phases = _phases_from_eigenvalues(np.diagonal(t), d)
    eig = EigenSystem(phases, v, d)
    defect = max_norm_diff(eig.reconstruct(), m)
    if defect > RECONSTRUCTION_TOL:
        raise NumericalError(f"eigendecomposition failed to reconstruct the unitary (defect {defect:.3e})")
    return eig


# -- basic operations ---------------------------------------------------------

def mat_apply(m, psi: PureState | np.ndarray) -> np.ndarray:
    vec = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi)
    a = as_complex_matrix(m)
    if a.shape[1] != vec.shape[0]:
        raise ContractError(f"cannot apply {a.shape} matrix to vector of length {vec.shape[0]}")
    return a @ vec


def mat_mul(a, b) -> np.ndarray:
    a, b = as_complex_matrix(a), as_complex_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"shape mismatch {a.shape} @ {b.shape}")
    return a @ b


def dagger(m) -> np.ndarray:
    return as_complex_matrix(m).conj().T


def max_norm_diff(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


# -- state comparison ---------------------------------------------------------

def _check_pair(psi: PureState, phi: PureState) -> None:
    if psi.dim != phi.dim:
        raise ContractError(f"dimension mismatch {psi.dim} vs {phi.dim}")
    if psi.basis is not phi.basis:
        raise ContractError("states are expressed in different bases")


def overlap(psi: PureState, phi: PureState) -> complex:
    _check_pair(psi, phi)
    return complex(np.vdot(psi.amplitudes, phi.amplitudes))


def fidelity(psi: PureState, phi: PureState) -> float:
    return abs(overlap(psi, phi)) ** 2


def trace_distance_pure(psi: PureState, phi: PureState) -> float:
    """``sqrt(1 - |<psi|phi>|^2)``, computed as the norm of the part of ``phi``
    orthogonal to ``psi`` to avoid cancellation for nearly equal states."""
    _check_pair(psi, phi)
    a, b = psi.amplitudes, phi.amplitudes
    perp = b - a * np.vdot(a, b)
    return float(min(1.0, np.linalg.norm(perp)))


def phase_aligned_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Max-norm difference of two vectors after removing their relative global phase.

    The phase is fixed on the largest-magnitude amplitude of ``a``.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch {a.shape} vs {b.shape}")
    i = int(np.argmax(np.abs(a)))
    if abs(b[i]) == 0:
        return float(np.max(np.abs(a - b)) if np.any(a) else np.max(np.abs(b)))
    phase = (a[i] / abs(a[i])) / (b[i] / abs(b[i]))
    return float(np.max(np.abs(a - phase * b)))
