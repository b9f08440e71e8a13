"""Command-line interface: simulate, fit, paper-suite, selftest.

Outputs are deterministic for a fixed seed. Every artifact carries the
resolved seed and a hash of the resolved configuration so a run can be
reproduced exactly. Errors go to stderr as single machine-parseable
lines prefixed with "error:".
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

import numpy as np

from . import fitting, sequences, suite
from .params import ConfigError, RunConfig, load_config, serialize_config


def _config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg, indent=None).encode()).hexdigest()[:16]


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load_run_config(args) -> RunConfig:
    cfg = load_config(path=args.config) if args.config else load_config()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(detection=dataclasses.replace(cfg.detection, rng_seed=args.seed))
    if getattr(args, "protocol", None):
        cfg = cfg.replace(protocol=dataclasses.replace(cfg.protocol, id=args.protocol))
    return cfg


def cmd_simulate(args) -> int:
    if not args.config and not os.environ.get("ODMRKIT_CONFIG"):
        print(
            "usage error: simulate needs --config PATH (or ODMRKIT_CONFIG set)",
            file=sys.stderr,
        )
        return 2
    cfg = _load_run_config(args)
    if args.protocol:
        # --protocol selects the canonical sweep for that protocol
        spec = sequences.canonical_protocol(args.protocol, cfg.defect, cfg)
    else:
        spec = sequences.ProtocolSpec.from_config(cfg.protocol)
    result = sequences.run_protocol(spec, cfg)
    out = args.out or f"{spec.id}.csv"
    _write(out, result.to_csv())
    sidecar = {
        "config": json.loads(serialize_config(cfg, indent=None)),
        "config_hash": _config_hash(cfg),
        "seed": cfg.detection.rng_seed,
        "protocol": spec.id,
        "sweep": {"name": result.sweep_name, "points": int(result.sweep_values.size)},
    }
    _write(os.path.splitext(out)[0] + ".json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({result.sweep_values.size} points, seed {cfg.detection.rng_seed})")
    return 0


def _read_csv(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError("no data rows")
    header = [h.strip().lower() for h in lines[0].split(",")]
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise ValueError(f"row {i}: {exc}") from None
    if not rows:
        raise ValueError("no data rows")
    data = np.asarray(rows, dtype=float)
    if "sweep_value" in header:
        # simulate output: sweep_value, mean_counts, sampled_counts, sigma
        x = data[:, header.index("sweep_value")]
        y = data[:, header.index("sampled_counts")]
        sigma = data[:, header.index("sigma")]
    else:
        x = data[:, 0]
        y = data[:, 1]
        sigma = data[:, 2] if data.shape[1] > 2 else None
    if sigma is None or np.all(sigma == 0):
        print("warning: no sigma column; using sqrt(max(y, 1))", file=sys.stderr)
        sigma = np.sqrt(np.maximum(np.abs(y), 1.0))
    sigma = np.where(sigma <= 0, np.sqrt(np.maximum(np.abs(y), 1.0)), sigma)
    return x, y, sigma


def cmd_fit(args) -> int:
    x, y, sigma = _read_csv(args.data)
    opts = {}
    if args.model == "raman":
        opts["power"] = args.raman_power
    model = fitting.get_model(args.model, **opts)
    try:
        if args.theta0:
            theta0 = np.array([float(v) for v in args.theta0.split(",")])
            result = fitting.fit(model, x, y, sigma, theta0)
        else:
            result = fitting.fit_auto(model, x, y, sigma)
    except fitting.ModelDomainError as exc:
        print(f"error: model domain: {exc}", file=sys.stderr)
        return 1
    out = args.out or f"fit_{args.model}.json"
    _write(out, result.to_json() + "\n")
    print(f"wrote {out} (reduced chi2 {result.reduced_chi2:.4g}, converged {result.converged})")
    return 0


def cmd_paper_suite(args) -> int:
    cfg = _load_run_config(args)
    rows = suite.run_suite(
        config=cfg,
        out_dir=args.out or "suite_out",
        n_trials=args.trials,
        progress=lambda row: print(row.line(), flush=True),
    )
    print(suite.summary_table(rows).splitlines()[-1])
    return 0 if all(r.passed for r in rows) else 1


def cmd_selftest(args) -> int:
    """Quick structural checks (seconds, not the full suite)."""
    from . import dynamics as dyn
    from .params import default_params
    from .spincore import spin1_operators

    failures = []

    def check(name, ok):
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        if not ok:
            failures.append(name)

    ops = spin1_operators()
    comm = ops.sx @ ops.sy - ops.sy @ ops.sx - 1j * ops.sz
    check("spin-1 commutator", float(np.abs(comm).max()) < 1e-12)
    p = default_params()
    gen = dyn.build_generator(p, dyn.DriveSet(duration_us=1.0), t1_us=np.inf, free_dephasing_us=np.inf)
    s = dyn.propagate_segment(dyn.QuantumState.basis(3), gen, p.t_opt_us)
    check("excited decay over one lifetime", abs(s.excited_population - np.exp(-1)) < 1e-9)
    gen2 = dyn.build_generator(p, dyn.mw_pulse("plus", 1.0, 0.5), t1_us=np.inf, free_dephasing_us=np.inf)
    s2 = dyn.propagate_segment(dyn.QuantumState.basis(0), gen2, 0.5)
    check("pi pulse population swap", abs(s2.populations[2] - 1.0) < 1e-6)
    m = fitting.get_model("exp_decay")
    x = np.linspace(0, 10, 41)
    y = m(x, np.array([2.0, 3.0, 0.5]))
    out = fitting.fit(m, x, y, np.full_like(x, 1e-3), np.array([1.0, 5.0, 0.0]))
    check("exp fit round trip", bool(np.allclose(out.theta, [2.0, 3.0, 0.5], rtol=1e-8)))
    cfgtext = serialize_config(RunConfig())
    check("config round trip", load_config(cfgtext) == RunConfig())
    print(f"{5 - len(failures)}/5 selftests passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="odmrkit",
        description="Simulate and fit optical-spin experiments on spin-1 defect ensembles.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a protocol from a config file")
    sim.add_argument("--config", help="JSON config path (defaults to $ODMRKIT_CONFIG)")
    sim.add_argument("--out", help="output CSV path (default <protocol>.csv)")
    sim.add_argument("--seed", type=int, help="override the RNG seed")
    sim.add_argument("--protocol", choices=sequences.PROTOCOL_IDS, help="override the protocol id")
    sim.set_defaults(fn=cmd_simulate)

    fit_p = sub.add_parser("fit", help="fit a CSV of (x, y, sigma) with a library model")
    fit_p.add_argument("--data", required=True, help="input CSV path")
    fit_p.add_argument("--model", required=True, choices=fitting.MODEL_IDS)
    fit_p.add_argument("--out", help="output JSON report path")
    fit_p.add_argument("--theta0", help="comma-separated initial parameters")
    fit_p.add_argument("--raman-power", type=int, default=9, choices=(3, 5, 7, 9))
    fit_p.set_defaults(fn=cmd_fit)

    ps = sub.add_parser(
        "paper-suite",
        help="run every reference-value check and write a summary table",
    )
    ps.add_argument("--config", help="JSON config path")
    ps.add_argument("--out", help="artifact directory (default suite_out)")
    ps.add_argument("--seed", type=int, help="override the RNG seed")
    ps.add_argument("--trials", type=int, default=100, help="statistical trials per check")
    ps.set_defaults(fn=cmd_paper_suite)

    st = sub.add_parser("selftest", help="quick structural self-checks")
    st.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
