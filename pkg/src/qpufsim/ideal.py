"""Ideal QPUF: a von Neumann measurement in a Haar-random basis.

The instrument measures in the basis ``{U|i>}``.  Outcome ``i`` occurs with
probability ``|<i|U^dagger|psi>|^2`` and leaves the system in ``U|i>``, which
is the quantum token; the outcome itself is public.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ContractError, ScaleError
from .linalg import (
    Basis,
    PureState,
    UnitaryMatrix,
    haar_unitary,
    random_pure_state,
    sample_index,
    trace_distance_pure,
)

RCNOT_MAX_DIM = 64


@dataclass(frozen=True)
class IdealQpuf:
    unitary: UnitaryMatrix

    @property
    def dim(self) -> int:
        return self.unitary.dim

    @classmethod
    def sample(cls, dim: int, rng: np.random.Generator) -> "IdealQpuf":
        return cls(haar_unitary(dim, rng))

    def token(self, k: int) -> PureState:
        """The post-measurement state ``U|k>``."""
        return PureState(self.unitary.column(k))

    def projector(self, k: int) -> np.ndarray:
        col = self.unitary.column(k)
        return np.outer(col, col.conj())


@dataclass(frozen=True)
class QueryRecord:
    input_state: PureState
    outcome: int
    token_state: PureState


class Owner(enum.Enum):
    HONEST = "honest"
    ADVERSARY = "adversary"


@dataclass
class QueryDatabase:
    owner: Owner = Owner.HONEST
    records: list[QueryRecord] = field(default_factory=list)

    def add(self, record: QueryRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def outcomes(self) -> list[int]:
        return [r.outcome for r in self.records]

    def token_matrix(self) -> np.ndarray:
        """Distinct token states as columns (degenerate records collapse)."""
        seen: dict[int, np.ndarray] = {}
        for r in self.records:
            seen.setdefault(r.outcome, r.token_state.amplitudes)
        if not seen:
            return np.zeros((0, 0), dtype=np.complex128)
        return np.stack(list(seen.values()), axis=1)


@dataclass(frozen=True)
class VerificationResult:
    measured_outcome: int
    passed: bool
    refreshed_token: object  # PureState for the ideal model, PeToken or None for PE


def _check_input(qpuf: IdealQpuf, psi: PureState) -> None:
    if psi.dim != qpuf.dim:
        raise ContractError(f"state of dimension {psi.dim} given to a D={qpuf.dim} QPUF")
    if psi.basis is not Basis.STANDARD:
        raise ContractError("ideal QPUF expects standard-basis input")


def outcome_distribution(qpuf: IdealQpuf, psi: PureState) -> np.ndarray:
    _check_input(qpuf, psi)
    amps = qpuf.unitary.matrix.conj().T @ psi.amplitudes
    return np.abs(amps) ** 2


def measure(qpuf: IdealQpuf, psi: PureState, rng: np.random.Generator) -> tuple[int, PureState]:
    k = sample_index(outcome_distribution(qpuf, psi), rng)
    return k, qpuf.token(k)


def generate_token(qpuf: IdealQpuf, input_state: PureState, rng: np.random.Generator) -> QueryRecord:
    k, token = measure(qpuf, input_state, rng)
    return QueryRecord(input_state, k, token)


def verify_token(
    qpuf: IdealQpuf, token: PureState, claimed_outcome: int, rng: np.random.Generator
) -> VerificationResult:
    if not 0 <= claimed_outcome < qpuf.dim:
        raise ContractError(f"claimed outcome {claimed_outcome} outside Z_{qpuf.dim}")
    k, post = measure(qpuf, token, rng)
    return VerificationResult(k, k == claimed_outcome, post)


# -- RCNOT circuit --------------------------------------------------------------

def shift_matrix(dim: int) -> np.ndarray:
    """Generalized Pauli X: ``|i> -> |i+1 mod D>``."""
    return np.roll(np.eye(dim, dtype=np.complex128), 1, axis=0)


def rcnot_output_state(u: UnitaryMatrix, psi: PureState) -> np.ndarray:
    """Run the RCNOT circuit on ``psi (x) |0>``; returns amplitudes as a (D, D)
    array indexed by (control, ancilla).

    The composite is built explicitly from (U^dagger (x) I), the generalized
    CX and (U (x) I); this is the brute-force check of the direct channel.
    """
    dim = u.dim
    if psi.dim != dim:
        raise ContractError("state/unitary dimension mismatch")
    if dim > RCNOT_MAX_DIM:
        raise ScaleError(f"RCNOT oracle limited to D <= {RCNOT_MAX_DIM}")
    eye = np.eye(dim)
    x = shift_matrix(dim)
    cx = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    xp = eye.astype(np.complex128)
    for i in range(dim):
        e = np.zeros((dim, dim))
        e[i, i] = 1.0
        cx += np.kron(e, xp)
        xp = x @ xp
    circuit = np.kron(u.matrix, eye) @ cx @ np.kron(u.matrix.conj().T, eye)
    ancilla0 = np.zeros(dim)
    ancilla0[0] = 1.0
    out = circuit @ np.kron(psi.amplitudes, ancilla0)
    return out.reshape(dim, dim)


def rcnot_distribution(u: UnitaryMatrix, psi: PureState) -> np.ndarray:
    return np.sum(np.abs(rcnot_output_state(u, psi)) ** 2, axis=0)


def rcnot_measure(u: UnitaryMatrix, psi: PureState, rng: np.random.Generator) -> tuple[int, PureState]:
    out = rcnot_output_state(u, psi)
    probs = np.sum(np.abs(out) ** 2, axis=0)
    k = sample_index(probs, rng)
    return k, PureState(out[:, k] / np.sqrt(probs[k]))


# -- hardware requirements --------------------------------------------------------

@dataclass(frozen=True)
class HardwareReport:
    collision_resistance_rate: float
    robustness_rate: float
    collision_pairs: int
    robustness_pairs: int


def check_ideal_hardware(qpuf: IdealQpuf, trials: int, rng: np.random.Generator, tol: float = 1e-9) -> HardwareReport:
    """Empirical collision-resistance and robustness rates.

    Each trial issues a token from a random input, re-measures it (a same-outcome
    pair) and measures a second random input (a different-outcome pair whenever
    the outcomes differ).  A rate with no pairs of its kind is reported as 1.
    """
    if trials < 1:
        raise ContractError("trials must be >= 1")
    coll_ok = coll_n = rob_ok = rob_n = 0
    for _ in range(trials):
        i, tok_i = measure(qpuf, random_pure_state(qpuf.dim, rng), rng)
        j, tok_j = measure(qpuf, tok_i, rng)
        k, tok_k = measure(qpuf, random_pure_state(qpuf.dim, rng), rng)
        for a, ta, b, tb in ((i, tok_i, j, tok_j), (i, tok_i, k, tok_k)):
            dist = trace_distance_pure(ta, tb)
            if a == b:
                rob_n += 1
                rob_ok += dist <= tol
            else:
                coll_n += 1
                coll_ok += abs(dist - 1.0) <= tol
    return HardwareReport(
        coll_ok / coll_n if coll_n else 1.0,
        rob_ok / rob_n if rob_n else 1.0,
        coll_n,
        rob_n,
    )


# -- serialization ----------------------------------------------------------------

def encode_amplitudes(vec: np.ndarray) -> bytes:
    """Interleaved (re, im) pairs as little-endian float64."""
    v = np.asarray(vec, dtype=np.complex128)
    return np.stack([v.real, v.imag], axis=1).astype("<f8").tobytes()


def decode_amplitudes(raw: bytes) -> np.ndarray:
    pairs = np.frombuffer(raw, dtype="<f8").reshape(-1, 2)
    return pairs[:, 0] + 1j * pairs[:, 1]


RECORD_COLUMNS = ("outcome", "input_amplitudes", "token_amplitudes")


def write_records(records: Iterable[QueryRecord], fp: io.TextIOBase) -> None:
    """CSV dump: decimal outcome plus hex-encoded amplitude blobs."""
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow([
            str(int(r.outcome)),
            encode_amplitudes(r.input_state.amplitudes).hex(),
            encode_amplitudes(r.token_state.amplitudes).hex(),
        ])


def read_records(fp: io.TextIOBase) -> list[QueryRecord]:
    rows = csv.reader(fp)
    header = next(rows)
    if tuple(header) != RECORD_COLUMNS:
        raise ContractError(f"unexpected record header {header}")
    out = []
    for outcome, inp, tok in rows:
        out.append(QueryRecord(
            PureState(decode_amplitudes(bytes.fromhex(inp))),
            int(outcome),
            PureState(decode_amplitudes(bytes.fromhex(tok))),
        ))
    return out
