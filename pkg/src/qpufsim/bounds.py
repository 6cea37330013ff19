"""Closed-form security and verification bounds, plus numeric checks of the
sinc-series inequalities they rest on."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError

TWO_OVER_PI2 = 2.0 / math.pi**2


@dataclass(frozen=True)
class BoundReport:
    name: str
    parameters: dict = field(default_factory=dict)
    value: float = math.nan
    validity_preconditions_met: bool = True

    def csv_row(self) -> list[str]:
        params = ";".join(f"{k}={v}" for k, v in self.parameters.items())
        return [self.name, params, repr(float(self.value))]


def lemma1_lower(b: float) -> float:
    """Lower bound ``1 - 2/(pi^2 (b + 1/2))`` on a window of 2*delta+1 squared
    sincs, valid for points at least ``b`` inside the window edge."""
    if b < 0:
        raise PreconditionError("window lower bound needs b >= 0")
    return 1.0 - TWO_OVER_PI2 / (b + 0.5)


def lemma2_upper(c: float) -> float:
    """Upper bound ``2/(pi^2 (c - 1))`` on the same window sum for points at
    least ``c`` outside the window edge."""
    if not c > 1:
        raise PreconditionError("window upper bound needs c > 1 (vacuous otherwise)")
    return TWO_OVER_PI2 / (c - 1.0)


def f_delta(delta: int) -> float:
    if delta < 2:
        raise PreconditionError("f(delta) is defined for delta >= 2")
    return (1.0 - TWO_OVER_PI2 / (math.sqrt(delta) + 0.5)) * (1.0 - TWO_OVER_PI2 / abs(delta - 0.5))


def verification_lower_bound(delta: int) -> float:
    """Lower bound ``(1 - sqrt(1 - f(delta)))**2`` on the per-round pass probability."""
    return (1.0 - math.sqrt(1.0 - f_delta(delta))) ** 2


def ideal_forgery_bound(dim: int, q_size: int) -> float:
    if q_size < 0 or q_size >= dim:
        raise PreconditionError(f"need 0 <= |Q| < D, got |Q|={q_size}, D={dim}")
    return 1.0 / (dim - q_size)


def pe_forgery_bound(d: int, delta: int, q_size: int) -> float:
    """Bound on the expected forging probability for the PE-QPUF.

    Evaluated exactly as printed, including the ``d / (2 (delta + delta/2))``
    term for the size of the enlarged window's complement.
    """
    if delta < 4:
        raise PreconditionError(f"need delta >= 4 so that c = delta/2 > 1, got delta={delta}")
    if not d / (3 * delta) > q_size:
        raise PreconditionError(f"need d/(3 delta) > |Q|, got {d / (3 * delta):.4g} <= {q_size}")
    tail = TWO_OVER_PI2 / (delta / 2 - 1)
    return (1.0 - tail) * (1.0 / (d / (2 * (delta + delta / 2)) - q_size)) + tail


def bound_table(deltas, d_values=(), dims=(), q_size: int = 0) -> list[BoundReport]:
    rows: list[BoundReport] = []
    for delta in deltas:
        ok = delta >= 2
        rows.append(BoundReport("f_delta", {"delta": delta}, f_delta(delta) if ok else math.nan, ok))
        rows.append(BoundReport("verification_lower_bound", {"delta": delta},
                                verification_lower_bound(delta) if ok else math.nan, ok))
        for d in d_values:
            ok = delta >= 4 and d / (3 * delta) > q_size
            rows.append(BoundReport("pe_forgery_bound", {"d": d, "delta": delta, "q_size": q_size},
                                    pe_forgery_bound(d, delta, q_size) if ok else math.nan, ok))
    for dim in dims:
        ok = q_size < dim
        rows.append(BoundReport("ideal_forgery_bound", {"D": dim, "q_size": q_size},
                                ideal_forgery_bound(dim, q_size) if ok else math.nan, ok))
    return rows


# -- numeric validation of the sinc-series lemmas ----------------------------------

def sinc_window_sum(x, delta: int) -> np.ndarray:
    """``sum_{|k| <= delta} sinc(x - k)**2`` with the normalized sinc."""
    x = np.asarray(x, dtype=float)
    k = np.arange(-delta, delta + 1)
    return np.sum(np.sinc(x[..., None] - k) ** 2, axis=-1)


def lemma1_margin(delta: int, b: float, num: int = 1000) -> float:
    """Smallest ``series - bound`` over a grid of ``|x| <= delta - b``.

    The series is a finite sum, so it is evaluated exactly with no tail.
    """
    reach = delta - b
    if reach < 0:
        raise PreconditionError("need b <= delta")
    xs = np.linspace(-reach, reach, num)
    return float(np.min(sinc_window_sum(xs, delta)) - lemma1_lower(b))


def lemma2_margin(delta: int, c: float, span: float = 50.0, num: int = 1000) -> float:
    """Smallest ``bound - series`` over a grid of ``delta + c <= |x| <= delta + c + span``."""
    lo = delta + c
    side = np.linspace(lo, lo + span, num)
    xs = np.concatenate([side, -side])
    return float(lemma2_upper(c) - np.max(sinc_window_sum(xs, delta)))
