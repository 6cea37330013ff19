"""Quick invariant checks runnable from the command line (``qpufsim selftest``).

Each check returns ``(name, ok, detail)``; the suite takes a few seconds.
"""
from __future__ import annotations

import numpy as np

from . import bounds, ideal, pe
from .linalg import Basis, PureState, RngStream, haar_unitary, random_pure_state, unitarity_defect

TOL = 1e-9


def _unitarity(rng):
    worst = max(unitarity_defect(haar_unitary(n, rng).matrix) for n in (1, 2, 8, 64) for _ in range(5))
    return worst <= TOL, f"max defect {worst:.2e}"


def _ideal_reverify(rng):
    fails = 0
    for _ in range(200):
        q = ideal.IdealQpuf.sample(8, rng)
        rec = ideal.generate_token(q, random_pure_state(8, rng), rng)
        fails += not ideal.verify_token(q, rec.token_state, rec.outcome, rng).passed
    return fails == 0, f"{fails}/200 re-verifications failed"


def _povm_completeness(rng):
    worst = 0.0
    for d, dim in ((8, 4), (128, 8)):
        for _ in range(5):
            q = pe.PeQpuf.sample(d, dim, 1, rng)
            worst = max(worst, float(np.max(np.abs(pe.povm_table(q).sum(axis=0) - 1.0))))
    return worst <= TOL, f"max |sum_k M_k - I| {worst:.2e}"


def _oracle_match(rng):
    worst = 0.0
    for d, dim in ((8, 4), (16, 8)):
        for _ in range(3):
            u = haar_unitary(dim, rng)
            q = pe.PeQpuf.from_unitary(u, d, 1)
            psi = random_pure_state(dim, rng)
            fast = pe.outcome_distribution(q, q.eigensystem.to_eigenbasis(psi))
            slow = np.sum(np.abs(pe.full_circuit_state(u, d, psi)) ** 2, axis=1)
            worst = max(worst, 0.5 * float(np.sum(np.abs(fast - slow))))
    return worst <= TOL, f"max total variation {worst:.2e}"


def _integer_phases(rng):
    d, dim = 16, 4
    phases = rng.choice(d, size=dim, replace=False).astype(float)
    q = pe.PeQpuf.from_phases(phases, d, 0)
    worst = 0.0
    for j in range(dim):
        probs = pe.outcome_distribution(q, PureState.basis_state(dim, j, Basis.EIGEN))
        target = np.zeros(d)
        target[int(phases[j])] = 1.0
        worst = max(worst, float(np.max(np.abs(probs - target))))
    return worst <= 1e-12, f"max deviation {worst:.2e}"


def _bounds(rng):
    ok = abs(bounds.f_delta(2) - 0.77334) < 1e-4 and abs(bounds.verification_lower_bound(2) - 0.27449) < 1e-4
    margin = min(bounds.lemma1_margin(8, b) for b in (1, np.sqrt(8), 4))
    return ok and margin >= 0, f"f(2)={bounds.f_delta(2):.5f} min lemma margin {margin:.3e}"


CHECKS = (
    ("haar-unitarity", _unitarity),
    ("ideal-reverification", _ideal_reverify),
    ("povm-completeness", _povm_completeness),
    ("circuit-oracle", _oracle_match),
    ("integer-phases", _integer_phases),
    ("bounds", _bounds),
)


def run_all(seed: int = 0) -> list[tuple[str, bool, str]]:
    out = []
    for i, (name, fn) in enumerate(CHECKS):
        rng = RngStream(seed, i).generator()
        try:
            ok, detail = fn(rng)
        except Exception as e:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(e).__name__}: {e}"
        out.append((name, bool(ok), detail))
    return out
