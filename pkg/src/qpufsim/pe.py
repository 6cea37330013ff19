"""Phase-estimation QPUF.

Running phase estimation with a d-dimensional ancilla on a unitary ``U`` is a
quantum instrument whose Kraus operators are diagonal in the eigenbasis of
``U``.  For eigenphase ``phi_j`` (eigenvalue ``exp(2 pi i phi_j / d)``) and
outcome ``k`` the diagonal entry is::

    exp(i pi (phi_j - k) (1 - 1/d)) * sins_d(phi_j - k)

with ``sins_d(x) = sin(pi x) / (d sin(pi x / d))``.  The fast path below works
on these diagonals only; ``full_circuit_*`` rebuilds the circuit explicitly
and exists to cross-check it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ScaleError
from .ideal import VerificationResult
from .linalg import (
    Basis,
    EigenSystem,
    PureState,
    UnitaryMatrix,
    eigensystem_unitary,
    haar_unitary,
    sample_index,
)

SINGULARITY_EPS = 1e-12
FULL_CIRCUIT_MAX_DIM = 4096


def sins(x, d: int, eps: float = SINGULARITY_EPS):
    """Periodized sinc kernel ``sin(pi x) / (d sin(pi x / d))``.

    Removable singularities at multiples of ``d`` are filled with their limits:
    1 at even multiples of d and ``(-1)**(d+1)`` at odd ones (period 2d).
    """
    x = np.asarray(x, dtype=float)
    r = np.mod(x + d, 2 * d) - d  # reduced into [-d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(np.pi * r) / (d * np.sin(np.pi / d * r))
    a = np.abs(r)
    near0 = a <= eps
    near_d = a >= d - eps
    if near0.any() or near_d.any():
        val = np.where(near0, 1.0, val)
        val = np.where(near_d, (-1.0) ** (d + 1), val)
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class SinsKernel:
    d: int
    epsilon: float = SINGULARITY_EPS

    def __call__(self, x):
        return sins(x, self.d, self.epsilon)


def tilde_step(x, d: int, delta: int):
    """Smoothed window ``sum_{|delta'| <= delta} sins_d(x + delta')**2``."""
    x = np.asarray(x, dtype=float)
    offsets = np.arange(-delta, delta + 1)
    return np.sum(sins(x[..., None] + offsets, d) ** 2, axis=-1)


def circular_distance(a, b, d: int):
    diff = np.mod(np.asarray(a) - np.asarray(b), d)
    out = np.minimum(diff, d - diff)
    return out if np.ndim(out) else out.item()


def signed_circular_difference(a: int, b: int, d: int) -> int:
    """``a - b`` mapped into (-d/2, d/2]."""
    r = (a - b) % d
    return r - d if r > d // 2 else r


@dataclass(frozen=True)
class PeQpuf:
    eigensystem: EigenSystem
    delta: int

    def __post_init__(self):
        if not 0 <= self.delta <= self.d // 2:
            raise ContractError(f"decision boundary {self.delta} outside [0, {self.d // 2}]")

    @property
    def d(self) -> int:
        return self.eigensystem.ancilla_dim

    @property
    def dim(self) -> int:
        return self.eigensystem.dim

    @property
    def phases(self) -> np.ndarray:
        return self.eigensystem.phases

    @classmethod
    def from_unitary(cls, u: UnitaryMatrix, d: int, delta: int) -> "PeQpuf":
        return cls(eigensystem_unitary(u, d), delta)

    @classmethod
    def sample(cls, d: int, dim: int, delta: int, rng: np.random.Generator) -> "PeQpuf":
        return cls.from_unitary(haar_unitary(dim, rng), d, delta)

    @classmethod
    def from_phases(cls, phases, d: int, delta: int, eigenvectors=None) -> "PeQpuf":
        phases = np.asarray(phases, dtype=float)
        vecs = np.eye(phases.size) if eigenvectors is None else eigenvectors
        return cls(EigenSystem(phases, vecs, d), delta)


@dataclass(frozen=True)
class PeToken:
    verifier_value: int
    state_eig: PureState

    def __post_init__(self):
        if self.state_eig.basis is not Basis.EIGEN:
            raise ContractError("PE tokens are stored in eigenbasis coordinates")


def _eig_amplitudes(pe: PeQpuf, psi: PureState) -> np.ndarray:
    if psi.basis is not Basis.EIGEN:
        raise ContractError("PE fast path expects eigenbasis coordinates")
    if psi.dim != pe.dim:
        raise ContractError(f"state of dimension {psi.dim} given to a D={pe.dim} PE-QPUF")
    return psi.amplitudes


def kraus_diag(pe: PeQpuf, k: int) -> np.ndarray:
    if not 0 <= k < pe.d:
        raise ContractError(f"outcome {k} outside Z_{pe.d}")
    x = pe.phases - k
    return np.exp(1j * np.pi * x * (1 - 1 / pe.d)) * sins(x, pe.d)


def kraus_table(pe: PeQpuf) -> np.ndarray:
    """All Kraus diagonals, shape (d, D)."""
    x = pe.phases[None, :] - np.arange(pe.d)[:, None]
    return np.exp(1j * np.pi * x * (1 - 1 / pe.d)) * sins(x, pe.d)


def povm_table(pe: PeQpuf) -> np.ndarray:
    """Diagonals of ``M_k``: ``sins_d(phi_j - k)**2``, shape (d, D)."""
    x = pe.phases[None, :] - np.arange(pe.d)[:, None]
    return sins(x, pe.d) ** 2


def outcome_distribution(pe: PeQpuf, psi_eig: PureState) -> np.ndarray:
    c2 = np.abs(_eig_amplitudes(pe, psi_eig)) ** 2
    return povm_table(pe) @ c2


def measure(pe: PeQpuf, psi_eig: PureState, rng: np.random.Generator) -> tuple[int, PureState]:
    probs = outcome_distribution(pe, psi_eig)
    k = sample_index(probs, rng)
    post = kraus_diag(pe, k) * psi_eig.amplitudes
    return k, PureState(post / np.linalg.norm(post), Basis.EIGEN)


def window_labels(m: int, delta: int, d: int) -> np.ndarray:
    """Distinct outcome labels within circular distance ``delta`` of ``m``."""
    return np.unique(np.mod(m + np.arange(-delta, delta + 1), d))


def window_weight(pe: PeQpuf, m: int, psi_eig: PureState) -> float:
    """``<psi| M_{m,delta} |psi>``: probability the next outcome lands in the window."""
    if not 0 <= m < pe.d:
        raise ContractError(f"outcome {m} outside Z_{pe.d}")
    c2 = np.abs(_eig_amplitudes(pe, psi_eig)) ** 2
    labels = window_labels(m, pe.delta, pe.d)
    per_eig = np.sum(sins(labels[:, None] - pe.phases[None, :], pe.d) ** 2, axis=0)
    return float(np.clip(per_eig @ c2, 0.0, 1.0))


def window_projector_weight(pe: PeQpuf, m: int, psi_eig: PureState) -> float:
    """Weight of ``psi`` on eigenvectors with circular ``|phi_j - m| <= delta``."""
    if not 0 <= m < pe.d:
        raise ContractError(f"outcome {m} outside Z_{pe.d}")
    c2 = np.abs(_eig_amplitudes(pe, psi_eig)) ** 2
    inside = circular_distance(pe.phases, m, pe.d) <= pe.delta
    return float(np.sum(c2[inside]))


def generate(pe: PeQpuf, psi_in_eig: PureState, rng: np.random.Generator) -> PeToken:
    k, post = measure(pe, psi_in_eig, rng)
    return PeToken(k, post)


def verify(pe: PeQpuf, token: PeToken, rng: np.random.Generator) -> VerificationResult:
    """Re-measure the token; accept if the new outcome is within ``delta``
    (circularly) of the stored verifier value.

    On acceptance the refreshed token carries the new outcome as its verifier
    value.  On rejection the chain ends and no token is returned.
    """
    k, post = measure(pe, token.state_eig, rng)
    passed = circular_distance(k, token.verifier_value, pe.d) <= pe.delta
    return VerificationResult(k, bool(passed), PeToken(k, post) if passed else None)


# -- explicit circuit oracle -----------------------------------------------------

def fourier_matrix(d: int) -> np.ndarray:
    """``F = d^{-1/2} sum_{x,y} exp(-2 pi i x y / d) |x><y|``."""
    idx = np.arange(d)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / d) / np.sqrt(d)


def controlled_powers(u: UnitaryMatrix, d: int) -> np.ndarray:
    """``CU = sum_k |k><k| (x) U^k`` as a dense (dD, dD) matrix.

    Powers come from repeated multiplication so the oracle shares nothing with
    the eigendecomposition used by the fast path.
    """
    dim = u.dim
    cu = np.zeros((d * dim, d * dim), dtype=np.complex128)
    p = np.eye(dim, dtype=np.complex128)
    for k in range(d):
        cu[k * dim:(k + 1) * dim, k * dim:(k + 1) * dim] = p
        p = u.matrix @ p
    return cu


def _check_scale(u: UnitaryMatrix, d: int) -> None:
    if d < 2:
        raise ContractError("ancilla dimension must be at least 2")
    if d * u.dim > FULL_CIRCUIT_MAX_DIM:
        raise ScaleError(f"full-circuit oracle limited to d*D <= {FULL_CIRCUIT_MAX_DIM}, got {d * u.dim}")


def full_circuit_kraus(u: UnitaryMatrix, d: int) -> np.ndarray:
    """Kraus operators read off the circuit ``(F (x) I) CU (F^dagger (x) I)``
    acting on ``|0> (x) .``; returns shape (d, D, D)."""
    _check_scale(u, d)
    dim = u.dim
    eye = np.eye(dim)
    f = fourier_matrix(d)
    circuit = np.kron(f, eye) @ controlled_powers(u, d) @ np.kron(f.conj().T, eye)
    # columns of the circuit with ancilla input |0>
    iso = circuit[:, :dim]
    return iso.reshape(d, dim, dim)


def full_circuit_state(u: UnitaryMatrix, d: int, psi_std: PureState) -> np.ndarray:
    """Output amplitudes of the circuit on ``|0> (x) psi`` as a (d, D) array."""
    if psi_std.basis is not Basis.STANDARD or psi_std.dim != u.dim:
        raise ContractError("full-circuit oracle expects a standard-basis state of dimension D")
    return full_circuit_kraus(u, d) @ psi_std.amplitudes


def full_circuit_measure(
    u: UnitaryMatrix, d: int, psi_std: PureState, rng: np.random.Generator
) -> tuple[int, PureState]:
    out = full_circuit_state(u, d, psi_std)
    probs = np.sum(np.abs(out) ** 2, axis=1)
    k = sample_index(probs, rng)
    return k, PureState(out[k] / np.sqrt(probs[k]))
