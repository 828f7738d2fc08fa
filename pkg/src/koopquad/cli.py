"""Command-line entry point: ``koopquad {simulate,verify-lift,gains,compare}``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config, ConfigError, load_config
from .control import riccati_gain, riccati_residual
from .dynamics import BodyState, NumericalBlowUp, ReflectionError
from .lift import chain_oracle_residual, quad_configs, random_samples
from .reduction import reduce
from .sim import compare_controllers, run_closed_loop

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3
CONFIG_ENV = "KOOPQUAD_CONFIG"
LIFT_TOL = 1e-6


@dataclass
class Check:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


@dataclass
class VerificationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        lines = [f"{'check':<24}{'max residual':>16}{'tolerance':>12}  result"]
        for c in self.checks:
            lines.append(f"{c.name:<24}{c.residual:>16.3e}{c.tolerance:>12.1e}  {'PASS' if c.passed else 'FAIL'}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _config(path) -> Config:
    path = path or os.environ.get(CONFIG_ENV)
    return load_config(path) if path else Config()


def _seeded(cfg: Config, seed):
    if seed is not None:
        cfg.values["sensors"]["seed"] = seed
    return cfg


def _write_metrics(out: Path, name: str, metrics) -> None:
    (out / f"{name}.json").write_text(metrics.to_json() + "\n")
    (out / f"{name}.txt").write_text(metrics.to_text() + "\n")


def cmd_simulate(args) -> int:
    cfg = _seeded(_config(args.config), args.seed)
    out = Path(args.out or cfg["run"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.ini").write_text(cfg.to_text())
    res = run_closed_loop(cfg.params(), cfg.plan(), cfg.controller_spec(), cfg.sensors(), cfg.run_settings())
    res.log.to_csv(out / "log.csv")
    _write_metrics(out, "metrics", res.metrics)
    print(res.metrics.to_text())
    return EXIT_OK


def verify_lift(cfg: Config, samples: int, seed: int) -> VerificationReport:
    params = cfg.params()
    d = cfg["chains"]["full_depth"]
    configs = quad_configs(d, d)
    report = chain_oracle_residual(random_samples(params, samples, seed), configs, params)
    checks = [Check(f"{label} k={k}", r, LIFT_TOL) for (label, k), r in sorted(report.residuals.items())]
    return VerificationReport(checks)


def cmd_verify_lift(args) -> int:
    report = verify_lift(_config(args.config), args.samples, args.seed)
    print(report.to_text())
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_gains(args) -> int:
    cfg = _config(args.config)
    spec = cfg.controller_spec()
    w = spec.weights()
    K = riccati_gain(w.Q, w.R)
    params = cfg.params()
    model = reduce(BodyState.hover(), params, params.hover_thrust, spec.coeffs)
    with np.printoptions(precision=6, suppress=True):
        print("K =")
        print(K)
        print("hover G (rows yaw, x, y, z; columns T, tx, ty, tz) =")
        print(model.G)
    print(f"cond(G) = {model.cond:.6g}")
    print(f"riccati residual = {riccati_residual(K, w.Q, w.R):.3e}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _seeded(_config(args.config), args.seed)
    out = Path(args.out or cfg["run"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.ini").write_text(cfg.to_text())
    comp = compare_controllers(cfg.params(), cfg.plan(), cfg.controller_spec(), cfg.sensors(), cfg.run_settings())
    comp.klq.log.to_csv(out / "klq_log.csv")
    comp.baseline.log.to_csv(out / "baseline_log.csv")
    comp.residuals_to_csv(out / "residuals.csv")
    _write_metrics(out, "klq_metrics", comp.klq.metrics)
    _write_metrics(out, "baseline_metrics", comp.baseline.metrics)
    summary = comp.summary_text()
    (out / "summary.txt").write_text(summary + "\n")
    (out / "summary.json").write_text(json.dumps(
        {name: {"klq": a, "baseline": b} for name, a, b in comp.summary_rows()}, indent=2) + "\n")
    print(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="koopquad", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one closed-loop experiment")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-lift", help="certify the chain identity on random states")
    p.add_argument("--config")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_lift)

    p = sub.add_parser("gains", help="print the Riccati gain and hover G")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("compare", help="KLQ vs least-squares baseline on one scenario")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # LinAlgError and ReflectionError subclass ValueError; catch them first
    try:
        return args.func(args)
    except (NumericalBlowUp, FloatingPointError, np.linalg.LinAlgError, ReflectionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
