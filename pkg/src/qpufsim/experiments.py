"""Monte-Carlo experiments over fresh Haar-random QPUFs.

Every trial draws from its own ``RngStream(master_seed, stream_id(...))`` so
a report depends only on the configuration, never on the number of workers
or the order in which trials run.  Results are merged in trial order.
"""
from __future__ import annotations

import csv
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy

from . import __version__
from .bounds import ideal_forgery_bound, pe_forgery_bound, verification_lower_bound
from .errors import ConfigError
from .linalg import (
    DEGENERACY_TOL,
    RECONSTRUCTION_TOL,
    UNITARY_TOL,
    Basis,
    PureState,
    RngStream,
    haar_unitary,
    random_pure_state,
    random_state_in_complement,
)
from .pe import (
    PeQpuf,
    circular_distance,
    generate,
    signed_circular_difference,
    sins,
    verify,
    window_weight,
)

HISTOGRAM_COLUMNS = ("experiment_id", "d", "D", "diff", "count")
RATE_COLUMNS = ("experiment_id", "d", "D", "delta", "iteration", "v_rate", "bound", "num_states")
FORGERY_COLUMNS = ("experiment_id", "d_or_D", "delta", "q_size", "trial_block", "mean_p", "stderr", "bound")

# trial families; the token family is shared by the rate, histogram and reuse experiments
TAG_TOKEN, TAG_FORGE_IDEAL, TAG_FORGE_PE = 1, 2, 3

IDEAL_STRATEGIES = ("complement", "span")
PE_STRATEGIES = ("complement", "nearest-token")

CHUNK = 250


def stream_id(tag: int, delta: int, iteration: int, trial: int) -> int:
    if not (0 <= tag < 16 and 0 <= delta < 4096 and 0 <= iteration < 4096 and 0 <= trial < 2**32):
        raise ConfigError("trial coordinates out of range for stream packing")
    return (tag << 60) | (delta << 48) | (iteration << 36) | trial


@dataclass
class ExperimentConfig:
    experiment_id: str
    d: int = 128
    D: int = 8
    delta_values: tuple[int, ...] = (2, 4, 8, 16, 32)
    num_states: int = 10_000
    num_iterations: int = 5
    master_seed: int = 0
    output_path: str | None = None
    q_size: int = 0
    chain_length: int = 1
    block_size: int = 1000
    workers: int = 1

    def __post_init__(self):
        self.delta_values = tuple(int(x) for x in self.delta_values)

    def validate(self) -> None:
        if self.num_states < 1:
            raise ConfigError("num_states must be >= 1")
        if self.num_iterations < 1:
            raise ConfigError("num_iterations must be >= 1")
        if self.d < 2 or self.D < 1:
            raise ConfigError("need d >= 2 and D >= 1")
        for delta in self.delta_values:
            if not 0 <= delta <= self.d // 2:
                raise ConfigError(f"delta={delta} outside [0, floor(d/2)] for d={self.d}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must fit in 64 bits")


@dataclass(frozen=True)
class SummaryRow:
    label: str
    delta: int
    empirical_rate: float
    bound: float
    std_dev: float
    num_trials: int
    n_pass: int | None = None

    @property
    def n_fail(self) -> int | None:
        return None if self.n_pass is None else self.num_trials - self.n_pass


@dataclass
class ExperimentReport:
    experiment_id: str
    kind: str
    columns: tuple[str, ...]
    rows: list[tuple]
    summary: list[SummaryRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def summary_for(self, delta: int | None = None, label: str | None = None) -> list[SummaryRow]:
        return [s for s in self.summary
                if (delta is None or s.delta == delta) and (label is None or s.label == label)]


def _run_chunks(fn: Callable, jobs: Sequence[tuple], workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _chunked(n: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]


def _metadata(cfg: ExperimentConfig, started: float) -> dict:
    meta = {k: v for k, v in asdict(cfg).items() if k != "workers"}
    meta["delta_values"] = list(cfg.delta_values)
    meta["wall_clock_s"] = round(time.perf_counter() - started, 3)
    return meta


# -- token chains (histogram, verification rate, reuse) ------------------------------

def token_chain(seed: int, d: int, dim: int, delta: int, iteration: int, trial: int,
                rounds: int) -> tuple[int, list[tuple[int, bool]]]:
    """Issue one token on a fresh PE-QPUF and verify it up to ``rounds`` times.

    Returns the generation outcome and a list of (outcome, passed) per round;
    the list stops at the first rejection.
    """
    rng = RngStream(seed, stream_id(TAG_TOKEN, delta, iteration, trial)).generator()
    pe = PeQpuf.sample(d, dim, delta, rng)
    psi = pe.eigensystem.to_eigenbasis(random_pure_state(dim, rng))
    token = generate(pe, psi, rng)
    m0 = token.verifier_value
    out = []
    for _ in range(rounds):
        res = verify(pe, token, rng)
        out.append((res.measured_outcome, res.passed))
        if not res.passed:
            break
        token = res.refreshed_token
    return m0, out


def token_chains_batched(seed: int, d: int, dim: int, delta: int, iteration: int,
                         lo: int, hi: int, rounds: int) -> list[tuple[int, list[tuple[int, bool]]]]:
    """Vectorized equivalent of ``token_chain`` over trials ``lo..hi-1``.

    Each trial still consumes its own stream in the same order as the scalar
    path; only the linear algebra is stacked.  Trials that would take a
    non-generic branch (resampled Ginibre draw, clustered eigenvalues, failed
    numerical checks) are handed to ``token_chain``.
    """
    n = hi - lo
    z = np.empty((n, dim, dim), dtype=np.complex128)
    psi = np.empty((n, dim), dtype=np.complex128)
    us = np.empty((n, rounds + 1))
    for i, t in enumerate(range(lo, hi)):
        rng = RngStream(seed, stream_id(TAG_TOKEN, delta, iteration, t)).generator()
        z[i] = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        psi[i] = v / np.linalg.norm(v)
        us[i] = rng.random(rounds + 1)

    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    mags = np.abs(diag)
    bad = np.any(mags <= 1e-12, axis=1)
    u = q * (diag / np.where(mags > 0, mags, 1.0))[:, None, :]
    w, vecs = np.linalg.eig(u)
    eye = np.eye(dim)
    vh = vecs.conj().transpose(0, 2, 1)
    bad |= np.max(np.abs(vh @ vecs - eye), axis=(1, 2)) > UNITARY_TOL
    phases = np.angle(w) * d / (2 * np.pi)
    phases = np.where(phases < 0, phases + d, phases)
    phases = np.abs(np.where(phases >= d, phases - d, phases))
    srt = np.sort(phases, axis=1)
    if dim > 1:
        gaps = np.concatenate([np.diff(srt, axis=1), (srt[:, :1] + d - srt[:, -1:])], axis=1)
        bad |= np.min(gaps, axis=1) <= DEGENERACY_TOL
    recon = (vecs * np.exp(2j * np.pi * phases / d)[:, None, :]) @ vh
    bad |= np.max(np.abs(recon - u), axis=(1, 2)) > RECONSTRUCTION_TOL

    c = (vh @ psi[..., None])[..., 0]
    x = phases[:, None, :] - np.arange(d)[None, :, None]
    s = sins(x, d)
    povm = s**2
    kraus = np.exp(1j * np.pi * x * (1 - 1 / d)) * s
    rows = np.arange(n)

    def step(c, draw):
        probs = np.einsum("nkj,nj->nk", povm, np.abs(c) ** 2)
        cdf = np.cumsum(probs, axis=1)
        k = np.sum(cdf <= (draw * cdf[:, -1])[:, None], axis=1)
        over = k >= d
        if over.any():
            k[over] = [int(np.flatnonzero(probs[i] > 0)[-1]) for i in np.flatnonzero(over)]
        post = kraus[rows, k] * c
        return k, post / np.linalg.norm(post, axis=1, keepdims=True)

    m0, c = step(c, us[:, 0])
    m_prev = m0.copy()
    alive = np.ones(n, dtype=bool)
    chains: list[list[tuple[int, bool]]] = [[] for _ in range(n)]
    for rnd in range(rounds):
        k, c = step(c, us[:, rnd + 1])
        passed = circular_distance(k, m_prev, d) <= delta
        for i in np.flatnonzero(alive):
            chains[i].append((int(k[i]), bool(passed[i])))
        alive &= passed
        m_prev = np.where(passed, k, m_prev)
        if not alive.any():
            break

    out = [(int(m0[i]), chains[i]) for i in range(n)]
    for i in np.flatnonzero(bad):
        out[i] = token_chain(seed, d, dim, delta, iteration, lo + int(i), rounds)
    return out


def _token_chunk(job) -> list:
    return token_chains_batched(*job)


def _token_trials(cfg: ExperimentConfig, delta: int, iteration: int, rounds: int) -> list:
    jobs = [(cfg.master_seed, cfg.d, cfg.D, delta, iteration, lo, hi, rounds)
            for lo, hi in _chunked(cfg.num_states)]
    return [r for chunk in _run_chunks(_token_chunk, jobs, cfg.workers) for r in chunk]


def run_outcome_histogram(cfg: ExperimentConfig) -> ExperimentReport:
    """Histogram of the signed circular difference m1 - m0 between generation
    and first verification.  The decision boundary does not affect the
    outcomes, so trials use delta=0 and ``delta_values`` only select which
    window masses are summarized."""
    cfg.validate()
    started = time.perf_counter()
    results = _token_trials(cfg, 0, 0, rounds=1)
    diffs = np.array([signed_circular_difference(chain[0][0], m0, cfg.d) for m0, chain in results])
    support = range(-((cfg.d - 1) // 2), cfg.d // 2 + 1)
    rows = [(cfg.experiment_id, cfg.d, cfg.D, k, int(np.sum(diffs == k))) for k in support]
    summary = []
    for delta in cfg.delta_values:
        n_in = int(np.sum(np.abs(diffs) <= delta))
        bound = verification_lower_bound(delta) if delta >= 2 else math.nan
        summary.append(SummaryRow("window", delta, n_in / len(diffs), bound, 0.0, len(diffs), n_in))
    return ExperimentReport(cfg.experiment_id, "histogram", HISTOGRAM_COLUMNS, rows, summary,
                            _metadata(cfg, started))


def run_verification_rate(cfg: ExperimentConfig) -> ExperimentReport:
    cfg.validate()
    started = time.perf_counter()
    rows, summary = [], []
    for delta in cfg.delta_values:
        bound = verification_lower_bound(delta) if delta >= 2 else math.nan
        rates, passes = [], 0
        for it in range(cfg.num_iterations):
            results = _token_trials(cfg, delta, it, rounds=1)
            n_pass = sum(chain[0][1] for _, chain in results)
            passes += n_pass
            rate = n_pass / cfg.num_states
            rates.append(rate)
            rows.append((cfg.experiment_id, cfg.d, cfg.D, delta, it, rate, bound, cfg.num_states))
        std = float(np.std(rates, ddof=1)) if len(rates) > 1 else 0.0
        summary.append(SummaryRow("rate", delta, float(np.mean(rates)), bound, std,
                                  cfg.num_states * cfg.num_iterations, passes))
    return ExperimentReport(cfg.experiment_id, "rate", RATE_COLUMNS, rows, summary, _metadata(cfg, started))


def run_reuse_chain(cfg: ExperimentConfig) -> ExperimentReport:
    """Verify each token ``chain_length`` times, updating the verifier value on
    every pass.  Row ``iteration`` holds the round number (1-based) and
    ``num_states`` the number of tokens still alive entering that round."""
    cfg.validate()
    if cfg.chain_length < 1:
        raise ConfigError("chain_length must be >= 1")
    started = time.perf_counter()
    rows, summary = [], []
    for delta in cfg.delta_values:
        bound = verification_lower_bound(delta) if delta >= 2 else math.nan
        results = _token_trials(cfg, delta, 0, rounds=cfg.chain_length)
        alive = len(results)
        for r in range(cfg.chain_length):
            n_pass = sum(1 for _, chain in results if len(chain) > r and chain[r][1])
            rate = n_pass / alive if alive else math.nan
            rows.append((cfg.experiment_id, cfg.d, cfg.D, delta, r + 1, rate, bound, alive))
            summary.append(SummaryRow(f"round-{r + 1}", delta, rate, bound, 0.0, alive, n_pass))
            alive = n_pass
    return ExperimentReport(cfg.experiment_id, "rate", RATE_COLUMNS, rows, summary, _metadata(cfg, started))


# -- forgery ---------------------------------------------------------------------

def forge_ideal_trial(seed: int, dim: int, q_size: int, trial: int) -> dict[str, float]:
    """One forging attempt against a fresh ideal QPUF.

    The adversary holds ``q_size`` distinct tokens (the best case: no repeated
    outcomes) and must reproduce the token of a fresh outcome q.
    """
    rng = RngStream(seed, stream_id(TAG_FORGE_IDEAL, 0, q_size, trial)).generator()
    u = haar_unitary(dim, rng).matrix
    labels = rng.permutation(dim)[: q_size + 1]
    known, target = u[:, labels[:q_size]], u[:, labels[q_size]]
    guess = random_state_in_complement(known, rng)
    out = {"complement": abs(np.vdot(guess, target)) ** 2}
    if q_size:
        w = rng.standard_normal(q_size) + 1j * rng.standard_normal(q_size)
        span_guess = known @ (w / np.linalg.norm(w))
        out["span"] = abs(np.vdot(span_guess, target)) ** 2
    else:
        out["span"] = out["complement"]
    return out


def _forge_ideal_chunk(job) -> list:
    seed, dim, q_size, lo, hi = job
    return [forge_ideal_trial(seed, dim, q_size, t) for t in range(lo, hi)]


def _target_outcome(known: Sequence[int], d: int, delta: int, rng: np.random.Generator) -> int:
    labels = np.arange(d)
    ok = np.ones(d, dtype=bool)
    for k in known:
        ok &= circular_distance(labels, k, d) >= 2 * delta
    candidates = labels[ok]
    if candidates.size == 0:
        raise ConfigError("no outcome is at distance >= 2*delta from every known outcome")
    return int(rng.choice(candidates))


def forge_pe_trial(seed: int, d: int, dim: int, delta: int, q_size: int, trial: int) -> dict[str, float]:
    """One forging attempt against a fresh PE-QPUF.

    The adversary queries ``q_size`` random inputs and keeps the tokens; the
    target outcome is drawn among labels at circular distance >= 2*delta from
    every known outcome.  Strategies:

    * ``complement``: a uniform state orthogonal to all stored tokens;
    * ``nearest-token``: replay the stored token whose outcome is closest to
      the target (uniform random state when nothing is stored).
    """
    rng = RngStream(seed, stream_id(TAG_FORGE_PE, delta, q_size, trial)).generator()
    pe = PeQpuf.sample(d, dim, delta, rng)
    tokens = [generate(pe, random_pure_state(dim, rng, Basis.EIGEN), rng) for _ in range(q_size)]
    m = _target_outcome([t.verifier_value for t in tokens], d, delta, rng)
    if tokens:
        basis, _ = np.linalg.qr(np.stack([t.state_eig.amplitudes for t in tokens], axis=1))
        complement = PureState(random_state_in_complement(basis, rng), Basis.EIGEN)
        nearest = min(tokens, key=lambda t: circular_distance(t.verifier_value, m, d)).state_eig
    else:
        complement = random_pure_state(dim, rng, Basis.EIGEN)
        nearest = complement
    return {
        "complement": window_weight(pe, m, complement),
        "nearest-token": window_weight(pe, m, nearest),
    }


def _forge_pe_chunk(job) -> list:
    seed, d, dim, delta, q_size, lo, hi = job
    return [forge_pe_trial(seed, d, dim, delta, q_size, t) for t in range(lo, hi)]


def _forgery_rows(cfg, results, strategies, size_label, delta, bound):
    rows, summary = [], []
    n = len(results)
    for strat in strategies:
        p = np.array([r[strat] for r in results])
        exp_id = f"{cfg.experiment_id}/{strat}"
        for b, lo in enumerate(range(0, n, cfg.block_size)):
            blk = p[lo:lo + cfg.block_size]
            se = float(np.std(blk, ddof=1) / np.sqrt(blk.size)) if blk.size > 1 else 0.0
            rows.append((exp_id, size_label, delta, cfg.q_size, b, float(np.mean(blk)), se, bound))
        se = float(np.std(p, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        rows.append((exp_id, size_label, delta, cfg.q_size, "all", float(np.mean(p)), se, bound))
        summary.append(SummaryRow(strat, delta, float(np.mean(p)), bound, se, n))
    return rows, summary


def run_forge_ideal(cfg: ExperimentConfig) -> ExperimentReport:
    if not 0 <= cfg.q_size < cfg.D:
        raise ConfigError(f"need 0 <= q_size < D, got q_size={cfg.q_size}, D={cfg.D}")
    if cfg.num_states < 1:
        raise ConfigError("need at least one trial")
    started = time.perf_counter()
    jobs = [(cfg.master_seed, cfg.D, cfg.q_size, lo, hi) for lo, hi in _chunked(cfg.num_states)]
    results = [r for chunk in _run_chunks(_forge_ideal_chunk, jobs, cfg.workers) for r in chunk]
    bound = ideal_forgery_bound(cfg.D, cfg.q_size)
    rows, summary = _forgery_rows(cfg, results, IDEAL_STRATEGIES, cfg.D, 0, bound)
    return ExperimentReport(cfg.experiment_id, "forgery", FORGERY_COLUMNS, rows, summary,
                            _metadata(cfg, started))


def run_forge_pe(cfg: ExperimentConfig) -> ExperimentReport:
    cfg.validate()
    if len(cfg.delta_values) != 1:
        raise ConfigError("forge-pe takes exactly one delta")
    (delta,) = cfg.delta_values
    if not cfg.q_size * 4 * delta < cfg.d:
        raise ConfigError(f"outcome spacing infeasible: need q_size*4*delta < d ({cfg.q_size * 4 * delta} >= {cfg.d})")
    started = time.perf_counter()
    jobs = [(cfg.master_seed, cfg.d, cfg.D, delta, cfg.q_size, lo, hi) for lo, hi in _chunked(cfg.num_states)]
    results = [r for chunk in _run_chunks(_forge_pe_chunk, jobs, cfg.workers) for r in chunk]
    bound = pe_forgery_bound(cfg.d, delta, cfg.q_size)
    rows, summary = _forgery_rows(cfg, results, PE_STRATEGIES, cfg.d, delta, bound)
    return ExperimentReport(cfg.experiment_id, "forgery", FORGERY_COLUMNS, rows, summary,
                            _metadata(cfg, started))


# -- output ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def summary_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".summary.txt")


def write_report(report: ExperimentReport, path: str | Path) -> None:
    """Write the CSV rows to ``path`` and a ``key=value`` sidecar next to it."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fp:
            w = csv.writer(fp, lineterminator="\n")
            w.writerow(report.columns)
            for row in report.rows:
                w.writerow([_fmt(v) for v in row])
        lines = [f"experiment_id={report.experiment_id}", f"kind={report.kind}"]
        meta = dict(report.metadata)
        lines.append(f"seed={meta.pop('master_seed', '')}")
        wall = meta.pop("wall_clock_s", "")
        for k, v in meta.items():
            lines.append(f"{k}={','.join(map(str, v)) if isinstance(v, list) else v}")
        for i, s in enumerate(report.summary):
            lines.append(f"summary.{i}=label:{s.label} delta:{s.delta} rate:{s.empirical_rate!r} "
                         f"bound:{s.bound!r} std:{s.std_dev!r} trials:{s.num_trials}")
        lines += [
            f"version.qpufsim={__version__}",
            f"version.numpy={np.__version__}",
            f"version.scipy={scipy.__version__}",
            f"version.python={platform.python_version()}",
            f"wall_clock_s={wall}",
        ]
        summary_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot write report to {path}: {e}") from e
