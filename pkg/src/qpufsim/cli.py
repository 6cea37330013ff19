"""Command-line front end.

Exit status: 0 on success, 1 on configuration/usage errors, 2 when a
numerical routine fails its own checks.
"""
from __future__ import annotations

import argparse
import csv
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import bounds, experiments, ideal, pe
from .errors import ConfigError, ContractError, NumericalError, PreconditionError
from .linalg import RngStream, random_pure_state

SUBCOMMANDS = ("ideal-demo", "pe-demo", "fig3-left", "fig3-right", "forge-ideal",
               "forge-pe", "reuse-chain", "bounds", "selftest")

# per-subcommand defaults; flags and --config override them
DEFAULTS = {
    "fig3-left": dict(d=64, D=64, delta=[5], states=1000),
    "fig3-right": dict(d=128, D=8, delta=[2, 4, 8, 16, 32], states=10_000, iters=5),
    "forge-ideal": dict(D=16, qsize=4, trials=100_000),
    "forge-pe": dict(d=128, D=16, delta=[4], qsize=0, trials=10_000),
    "reuse-chain": dict(d=128, D=8, delta=[8], states=1000, chain=5),
    "ideal-demo": dict(D=8),
    "pe-demo": dict(d=128, D=8, delta=[8]),
    "bounds": dict(delta=[2, 4, 8, 16, 32], d=[128], D=[16], qsize=0),
}

INT_KEYS = {"states", "iters", "trials", "qsize", "chain", "seed", "workers"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qpufsim", allow_abbrev=False,
                description="Quantum PUF simulator: protocol demos, Monte-Carlo experiments and bound tables.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--d", dest="d", type=int, action="append", help="ancilla dimension (repeatable for bounds)")
    p.add_argument("--D", dest="D", type=int, action="append", help="unitary dimension (repeatable for bounds)")
    p.add_argument("--delta", type=int, action="append", help="decision boundary (repeatable)")
    p.add_argument("--states", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--qsize", type=int)
    p.add_argument("--chain", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--config", help="file of key=value lines; command-line flags take precedence")
    return p


def read_config(path: str) -> dict:
    out: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-")
        if key in ("d", "D", "delta"):
            out[key] = [int(v) for v in value.split(",") if v.strip()]
        elif key in INT_KEYS:
            out[key] = int(value)
        elif key == "out":
            out[key] = value
        else:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
    return out


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS.get(args.subcommand, {}))
    if args.config:
        opts.update(read_config(args.config))
    for key in ("d", "D", "delta", "states", "iters", "trials", "qsize", "chain", "seed", "workers", "out"):
        val = getattr(args, key)
        if val is not None:
            opts[key] = val
    if args.subcommand != "bounds":
        for key in ("d", "D"):
            if isinstance(opts.get(key), list):
                if len(opts[key]) != 1:
                    raise ConfigError(f"--{key} takes a single value for {args.subcommand}")
                opts[key] = opts[key][0]
    if opts.get("seed") is None:
        env = os.environ.get("QPUFSIM_SEED")
        if env is not None:
            try:
                opts["seed"] = int(env)
            except ValueError as e:
                raise ConfigError(f"QPUFSIM_SEED is not an integer: {env!r}") from e
        else:
            opts["seed"] = secrets.randbits(63)
            print(f"seed={opts['seed']} (generated)")
    opts.setdefault("workers", os.cpu_count() or 1)
    return opts


def _config(name: str, opts: dict, **extra) -> experiments.ExperimentConfig:
    return experiments.ExperimentConfig(
        experiment_id=name,
        d=opts.get("d", 128),
        D=opts.get("D", 8),
        delta_values=tuple(opts.get("delta", ())),
        num_states=opts.get("trials" if name.startswith("forge") else "states", 1),
        num_iterations=opts.get("iters", 1),
        master_seed=opts["seed"],
        output_path=opts.get("out"),
        q_size=opts.get("qsize", 0),
        chain_length=opts.get("chain", 1),
        workers=opts["workers"],
        **extra,
    )


def _emit(report: experiments.ExperimentReport, opts: dict) -> None:
    out = opts.get("out") or f"{report.experiment_id}.csv"
    experiments.write_report(report, out)
    for s in report.summary:
        print(f"{s.label:>14}  delta={s.delta:<4} rate={s.empirical_rate:.6f}  bound={s.bound:.6f}  "
              f"std={s.std_dev:.6f}  n={s.num_trials}")
    print(f"wrote {out}")


def cmd_ideal_demo(opts: dict) -> int:
    rng = RngStream(opts["seed"]).generator()
    q = ideal.IdealQpuf.sample(opts["D"], rng)
    rec = ideal.generate_token(q, random_pure_state(q.dim, rng), rng)
    res = ideal.verify_token(q, rec.token_state, rec.outcome, rng)
    print(f"D={q.dim} generated outcome={rec.outcome}")
    print(f"verify: measured={res.measured_outcome} pass={str(res.passed).lower()}")
    return 0


def cmd_pe_demo(opts: dict) -> int:
    rng = RngStream(opts["seed"]).generator()
    delta = opts["delta"][0]
    q = pe.PeQpuf.sample(opts["d"], opts["D"], delta, rng)
    psi = q.eigensystem.to_eigenbasis(random_pure_state(q.dim, rng))
    token = pe.generate(q, psi, rng)
    res = pe.verify(q, token, rng)
    print(f"d={q.d} D={q.dim} delta={delta} generated m0={token.verifier_value}")
    print(f"verify: m1={res.measured_outcome} pass={str(res.passed).lower()} "
          f"bound={bounds.verification_lower_bound(delta) if delta >= 2 else float('nan'):.6f}")
    return 0


def cmd_bounds(opts: dict) -> int:
    qsize = opts.get("qsize", 0)
    print(f"{'delta':>6} {'f(delta)':>10} {'ver_bound':>10}")
    for delta in opts["delta"]:
        if delta >= 2:
            print(f"{delta:>6} {bounds.f_delta(delta):>10.5f} {bounds.verification_lower_bound(delta):>10.5f}")
        else:
            print(f"{delta:>6} {'n/a':>10} {'n/a':>10}")
    for dim in opts.get("D", []):
        val = bounds.ideal_forgery_bound(dim, qsize) if qsize < dim else float("nan")
        print(f"ideal_forgery D={dim} |Q|={qsize}: {val:.6g}")
    for d in opts.get("d", []):
        for delta in opts["delta"]:
            try:
                val = f"{bounds.pe_forgery_bound(d, delta, qsize):.6g}"
            except PreconditionError as e:
                val = f"n/a ({e})"
            print(f"pe_forgery d={d} delta={delta} |Q|={qsize}: {val}")
    if opts.get("out"):
        rows = bounds.bound_table(opts["delta"], opts.get("d", []), opts.get("D", []), qsize)
        with open(opts["out"], "w", encoding="utf-8", newline="") as fp:
            w = csv.writer(fp, lineterminator="\n")
            w.writerow(("name", "params", "value"))
            for r in rows:
                w.writerow(r.csv_row())
    return 0


def cmd_selftest(opts: dict) -> int:
    from .selftest import run_all

    results = run_all(opts["seed"])
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def run(subcommand: str, opts: dict) -> int:
    if subcommand == "ideal-demo":
        return cmd_ideal_demo(opts)
    if subcommand == "pe-demo":
        return cmd_pe_demo(opts)
    if subcommand == "bounds":
        return cmd_bounds(opts)
    if subcommand == "selftest":
        return cmd_selftest(opts)
    if subcommand == "fig3-left":
        _emit(experiments.run_outcome_histogram(_config("fig3-left", opts)), opts)
    elif subcommand == "fig3-right":
        _emit(experiments.run_verification_rate(_config("fig3-right", opts)), opts)
    elif subcommand == "reuse-chain":
        _emit(experiments.run_reuse_chain(_config("reuse-chain", opts)), opts)
    elif subcommand == "forge-ideal":
        _emit(experiments.run_forge_ideal(_config("forge-ideal", opts)), opts)
    elif subcommand == "forge-pe":
        _emit(experiments.run_forge_pe(_config("forge-pe", opts)), opts)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        return run(args.subcommand, opts)
    except (ConfigError, ContractError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
