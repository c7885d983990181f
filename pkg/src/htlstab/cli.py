"""Command-line entry point.

Subcommands: ``fit``, ``bounds``, ``audit``, ``loo`` and ``negative-transfer``.
Exit codes: 0 ok, 2 I/O error, 3 parse or configuration error, 4 solver
failure, 5 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .audit import audit_loo, audit_stability
from .bounds import bound_report
from .config import RunConfig, load_json
from .errors import ConfigError, ConvergenceError
from .experiment import ExperimentConfig, ExperimentError, rows_to_csv, run_experiment, summarize
from .htl import empirical_risk, loo_risk
from .kernels import resolve_kappa
from .rerm import fit

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INVARIANT = 0, 2, 3, 4, 5

logger = logging.getLogger("htlstab")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _require_test(cfg: RunConfig, command: str):
    test = cfg.load_test()
    if test is None:
        raise ConfigError(f"{command} needs a 'test' dataset in the config")
    return test


def cmd_fit(args) -> int:
    cfg = RunConfig.load(args.config)
    train = cfg.load_train()
    test = cfg.load_test()
    model = fit(train, cfg.loss, cfg.kernel, cfg.lam, cfg.source, cfg.solver)
    metrics = {
        "loss": cfg.loss.name,
        "objective": model.objective(),
        "train_risk": empirical_risk(model, train, cfg.loss),
        "rkhs_norm": model.rkhs_norm(),
        "iterations": model.stats.iterations,
        "residual": model.stats.residual,
    }
    if test is not None:
        metrics["test_risk"] = empirical_risk(model, test, cfg.loss)
    if args.out is not None:
        record = {
            "coeffs": model.coeffs.tolist(),
            "train_features": train.features.tolist(),
            "kernel": cfg.kernel.to_dict(),
            "lambda": cfg.lam,
            "loss": cfg.loss.to_dict(),
            "source": cfg.source.to_dict(),
            "solver_stats": {
                "iterations": model.stats.iterations,
                "residual": model.stats.residual,
                "objective": model.stats.objective,
            },
        }
        Path(args.out).write_text(_dump(record))
    sys.stdout.write(_dump(metrics))
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = RunConfig.load(args.config)
    train = cfg.load_train()
    test = _require_test(cfg, "bounds")
    kernel = resolve_kappa(cfg.kernel, train.features, test.features)
    reports = [bound_report(loss, kernel, cfg.lam, cfg.source, train, test).to_dict() for loss in cfg.losses]
    _emit(_dump(reports), args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = RunConfig.load(args.config)
    train = cfg.load_train()
    test = _require_test(cfg, "audit")
    kernel = resolve_kappa(cfg.kernel, train.features, test.features)
    results = []
    violations = 0
    for loss in cfg.losses:
        report = audit_stability(train, test, loss, kernel, cfg.lam, cfg.source, cfg.solver)
        bounds = bound_report(loss, kernel, cfg.lam, cfg.source, train, test)
        results.append({"loss": loss.name, **report.summary(), "beta_bound": bounds.beta, "gamma_bound": bounds.gamma})
        violations += report.lemma_a4_violations
        if args.out is not None:
            out = Path(args.out)
            report.write_per_index_csv(out.with_name(f"{out.stem}_{loss.name}_per_index.csv"))
    _emit(_dump(results), args.out)
    if violations:
        logger.error("%d leave-one-out deviations exceed their deterministic bound", violations)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_loo(args) -> int:
    cfg = RunConfig.load(args.config)
    train = cfg.load_train()
    test = cfg.load_test()
    results = []
    for loss in cfg.losses:
        if test is None:
            estimate = loo_risk(train, loss, cfg.kernel, cfg.lam, cfg.source, cfg.solver)
            results.append({"loss": loss.name, "loo_risk": estimate})
        else:
            res = audit_loo(train, test, loss, cfg.kernel, cfg.lam, cfg.source, cfg.solver)
            results.append({"loss": loss.name, "loo_risk": res.loo_risk, "test_risk": res.test_risk, "gap": res.gap})
    _emit(_dump(results), args.out)
    return EXIT_OK


def cmd_negative_transfer(args) -> int:
    raw = load_json(args.config) if args.config is not None else {}
    cfg = ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        cfg = replace(cfg, scenario=replace(cfg.scenario, seed=args.seed))
    risks = run_experiment(cfg, threads=args.threads)
    _emit(rows_to_csv(summarize(cfg, risks)), args.out)
    return EXIT_OK


COMMANDS = {
    "fit": (cmd_fit, "fit the transfer predictor and print risks"),
    "bounds": (cmd_bounds, "theoretical stability certificates as JSON"),
    "audit": (cmd_audit, "empirical stability audit as JSON plus per-index CSV"),
    "loo": (cmd_loo, "leave-one-out risk estimate"),
    "negative-transfer": (cmd_negative_transfer, "rotating-target experiment as CSV"),
}


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _threads(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"threads must be at least 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htlstab", description="Stability-certified hypothesis transfer learning.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for solver traces")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=name != "negative-transfer", help="JSON configuration file")
        p.add_argument("--seed", type=_seed, default=None, help="base seed (unsigned 64-bit)")
        p.add_argument("--out", default=None, help="output file (stdout when omitted)")
        p.add_argument("--threads", type=_threads, default=1, help="worker processes")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s %(message)s", stream=sys.stderr)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceError, ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
