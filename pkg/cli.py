"""Command-line front end: config in, JSON or CSV report out.

Every subcommand returns a ReportEnvelope plus an exit code:
0 all checks hold, 2 a check failed, 3 precondition error, 4 divergence.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd
import pendulum

from config_validator import (build_function_pairs, build_group, build_kernel,
                              build_tolerance, validate_config_on_startup)
from constants import (SharpConstant, closed_form_for, cstar_classical, cstar_group,
                       relative_deviation, sharp_constant)
from errors import ConfigError, HHError
from group import (HomogeneousGroup, ball_volume, dilation_scaling_residual,
                   sphere_measure, sphere_measure_method)
from hh_config import VERSION, CheckDefaults, ExitCodes
from kernels import Kernel, transpose
from logger import get_logger, setup_logging
from quad import QuadResult, json_float
from verify import (dilation_probe, equivalence_report, sharpness_sweep,
                    verify_theorem31)

logger = get_logger("cli")

Diagnostics = list[tuple[str, QuadResult]]


@dataclass
class ReportEnvelope:
    """Everything one run produced; results is a pure function of the config"""
    command: str
    config: dict[str, Any]
    results: dict[str, Any]
    diagnostics: list[dict[str, Any]] = field(default_factory=list)
    rows: list[dict[str, Any]] = field(default_factory=list)
    errors: list[dict[str, Any]] = field(default_factory=list)
    exit_code: int = ExitCodes.OK
    version: str = VERSION
    timestamp: str = field(default_factory=lambda: pendulum.now("UTC").to_iso8601_string())

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool": "hhsharp",
            "version": self.version,
            "command": self.command,
            "timestamp": self.timestamp,
            "config": self.config,
            "results": self.results,
            "diagnostics": self.diagnostics,
            "errors": self.errors,
            "exit_code": self.exit_code,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def results_json(self) -> str:
        """Canonical text of the results payload alone"""
        return json.dumps(self.results, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        pd.DataFrame(self.rows).to_csv(buffer, index=False)
        return buffer.getvalue()


def _diagnostics(items: Diagnostics) -> list[dict[str, Any]]:
    return [{"name": name, **res.to_dict()} for name, res in items]


def transposed_closed_form(kernel: Kernel, p: float,
                           group: HomogeneousGroup) -> SharpConstant | None:
    """Closed form of C*_p(k^T), looked up as C*_q(k) with q = p/(p-1)"""
    return closed_form_for(kernel, p / (p - 1.0), group)


# ============================================================================
# Subcommands
# ============================================================================

def cmd_constant(config: dict[str, Any]) -> ReportEnvelope:
    """Numeric C*_p in the configured mode, with the matching closed form if one exists"""
    group = build_group(config)
    kernel = build_kernel(config)
    tol = build_tolerance(config)
    p = config["p"]

    if config["mode"] == "classical":
        constant = cstar_classical(kernel, p, tol)
    else:
        constant = cstar_group(kernel, p, group, tol)
    closed = closed_form_for(kernel, p, group)
    deviation = relative_deviation(constant.value, closed.value) if closed else None

    exit_code = ExitCodes.OK
    if not constant.is_finite:
        exit_code = ExitCodes.DIVERGENCE
    elif deviation is not None:
        allowed = CheckDefaults.HOLDS_SLACK * (tol.rel + constant.quad.rel_error)
        if deviation > allowed:
            logger.error(f"numeric and closed-form constants differ by {deviation:.3g} "
                         f"(allowed {allowed:.3g})")
            exit_code = ExitCodes.CHECK_FAILED

    results = {
        "kernel": kernel.to_dict(),
        "group": group.to_dict(),
        "constant": constant.to_dict(),
        "closed_form": closed.to_dict() if closed else None,
        "deviation": None if deviation is None else json_float(deviation),
    }
    row = {"kernel": kernel.name, "p": p, "mode": constant.mode,
           "value": constant.value, "err_estimate": constant.err_estimate,
           "converged": constant.quad.converged if constant.quad else True,
           "closed_form": closed.value if closed else None,
           "deviation": deviation}
    diags: Diagnostics = [("constant", constant.quad), ("cross_check", constant.cross_check)]
    return ReportEnvelope("constant", config, results,
                          _diagnostics([(n, r) for n, r in diags if r is not None]),
                          [row], exit_code=exit_code)


def cmd_verify(config: dict[str, Any]) -> ReportEnvelope:
    """Bilinear, Hardy and dual inequalities plus the conjugate-function residual"""
    group = build_group(config)
    tol = build_tolerance(config)
    p = config["p"]
    pairs = build_function_pairs(config, group)
    diags: Diagnostics = []
    rows: list[dict[str, Any]] = []
    reports: list[dict[str, Any]] = []
    exit_code = ExitCodes.OK

    if config["mode"] == "theorem31":
        for i, (f, g) in enumerate(pairs):
            report = verify_theorem31(f, g, p, group, tol, forms=True)
            forms = report.extras["forms"]
            reports.append({"f": f.describe(), "g": g.describe(), "theorem31": report.to_dict()})
            diags.extend((f"pair{i}.theorem31.{n}", r) for n, r in report.quad_diagnostics)
            holds = report.holds and forms["hardy"].holds and forms["dual"].holds
            rows.append({"pair": i, "ratio": report.ratio, "hardy_ratio": forms["hardy"].ratio,
                         "dual_ratio": forms["dual"].ratio, "holds": holds})
            if not holds:
                exit_code = ExitCodes.CHECK_FAILED
        results = {"mode": "theorem31", "group": group.to_dict(), "reports": reports}
        return ReportEnvelope("verify", config, results, _diagnostics(diags), rows,
                              exit_code=exit_code)

    kernel = build_kernel(config)
    constant = sharp_constant(transpose(kernel), p, group, tol)
    closed = transposed_closed_form(kernel, p, group)
    if not constant.is_finite:
        exit_code = ExitCodes.DIVERGENCE
    for i, (f, g) in enumerate(pairs):
        eq = equivalence_report(kernel, f, g, p, group, tol, constant)
        reports.append({"f": f.describe(), "g": g.describe(), **eq.to_dict()})
        for label, rep in (("hh", eq.hardy_hilbert), ("hardy", eq.hardy), ("dual", eq.dual)):
            diags.extend((f"pair{i}.{label}.{n}", r) for n, r in rep.quad_diagnostics)
        if eq.pairing is not None:
            diags.append((f"pair{i}.pairing", eq.pairing))
        rows.append({"pair": i, "hh_ratio": eq.hardy_hilbert.ratio, "hardy_ratio": eq.hardy.ratio,
                     "dual_ratio": eq.dual.ratio, "residual": eq.residual,
                     "residual_tol": eq.residual_tol, "consistent": eq.consistent})
        all_hold = eq.hardy_hilbert.holds and eq.hardy.holds and eq.dual.holds
        if constant.is_finite and not (all_hold and eq.residual_ok):
            exit_code = ExitCodes.CHECK_FAILED

    results = {
        "mode": config["mode"],
        "kernel": kernel.to_dict(),
        "group": group.to_dict(),
        "constant": constant.to_dict(),
        "closed_form": closed.to_dict() if closed else None,
        "reports": reports,
    }
    if constant.quad is not None:
        diags.insert(0, ("constant", constant.quad))
    return ReportEnvelope("verify", config, results, _diagnostics(diags), rows,
                          exit_code=exit_code)


def cmd_sharpness(config: dict[str, Any]) -> ReportEnvelope:
    """Lower-bound ratios along the extremizer family as beta decreases"""
    group = build_group(config)
    kernel = build_kernel(config)
    tol = build_tolerance(config)
    sweep = sharpness_sweep(kernel, config["p"], group, config["betas"], tol,
                            pairing=config["pairing"],
                            max_workers=config["mc"]["max_workers"])
    exit_code = ExitCodes.OK if sweep.passed else ExitCodes.CHECK_FAILED
    if not sweep.passed:
        logger.error(f"sharpness sweep failed: monotone={sweep.monotone} "
                     f"approaches={sweep.approaches} bounded={sweep.bounded}")
    rows = [{"beta": e.beta, "ratio": e.ratio, "converged": e.converged,
             "flagged": e.flagged, "pairing_ratio": e.pairing_ratio}
            for e in sweep.entries]
    results = {"kernel": kernel.to_dict(), "group": group.to_dict(), "p": config["p"],
               **sweep.to_dict()}
    diags = [(f"beta={e.beta:g}", e.lower_bound) for e in sweep.entries]
    return ReportEnvelope("sharpness", config, results, _diagnostics(diags), rows,
                          exit_code=exit_code)


def cmd_dilation_probe(config: dict[str, Any]) -> ReportEnvelope:
    """Fitted scaling exponent of the normalized pairing under group dilations"""
    group = build_group(config)
    kernel = build_kernel(config)
    tol = build_tolerance(config)
    f, g = build_function_pairs(config, group)[0]
    probe = dilation_probe(kernel, f, g, config["p"], group, config["scales"], tol)
    exit_code = ExitCodes.OK if probe.passed else ExitCodes.CHECK_FAILED
    if not probe.passed:
        logger.error(f"dilation probe slope {probe.slope!r} differs from {probe.expected_slope!r}")
    rows = [{"a": e["a"], "ratio": e["ratio"], "converged": e["converged"],
             "flagged": e["flagged"]} for e in probe.entries]
    results = {"kernel": kernel.to_dict(), "group": group.to_dict(), "p": config["p"],
               "f": f.describe(), "g": g.describe(), **probe.to_dict()}
    return ReportEnvelope("dilation-probe", config, results, rows=rows, exit_code=exit_code)


def cmd_geometry(config: dict[str, Any]) -> ReportEnvelope:
    """Q, |S|, ball volumes and the dilation scaling residual of the group"""
    group = build_group(config)
    sphere = sphere_measure(group)
    radii = config["radii"]
    volumes = [{"r": r, "volume": ball_volume(group, r)} for r in radii]
    residual = dilation_scaling_residual(group, radii)
    exit_code = (ExitCodes.OK if residual <= CheckDefaults.SCALING_REL_TOL
                 else ExitCodes.CHECK_FAILED)
    results = {
        "group": group.to_dict(),
        "Q": group.Q,
        "sphere_measure": sphere.to_dict(),
        "method": sphere_measure_method(group),
        "ball_volumes": volumes,
        "scaling_residual": residual,
    }
    return ReportEnvelope("geometry", config, results,
                          _diagnostics([("sphere_measure", sphere)]), volumes,
                          exit_code=exit_code)


COMMANDS: dict[str, tuple[Callable[[dict[str, Any]], ReportEnvelope], str]] = {
    "constant": (cmd_constant, "Sharp constant C*_p of a kernel"),
    "verify": (cmd_verify, "Check the inequalities on test functions"),
    "sharpness": (cmd_sharpness, "Sweep the extremizer family towards C*_p"),
    "dilation-probe": (cmd_dilation_probe, "Scaling exponent of the pairing under dilations"),
    "geometry": (cmd_geometry, "Homogeneous dimension, sphere measure and ball volumes"),
}


# ============================================================================
# Argument parsing and dispatch
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hhsharp",
        description="Sharp constants of Hardy-Hilbert type inequalities on homogeneous groups")
    parser.add_argument("--version", action="version", version=f"hhsharp {VERSION}")
    parser.add_argument("--config", type=Path, default=None, help="Experiment config (JSON)")
    parser.add_argument("--rel-tol", type=float, default=None)
    parser.add_argument("--abs-tol", type=float, default=None)
    parser.add_argument("--max-subdiv", type=int, default=None)
    parser.add_argument("--mc-samples", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--output", type=Path, default=None, help="Write the report here instead of stdout")
    parser.add_argument("--format", choices=("json", "csv"), default=None)
    parser.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"),
                        default="WARNING")
    parser.add_argument("--log-file", type=Path, default=None)

    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, help=help_text)
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Command-line values that override the config file (None means not given)"""
    return {
        "tolerance": {"rel": args.rel_tol, "abs": args.abs_tol, "max_subdiv": args.max_subdiv},
        "mc": {"samples": args.mc_samples, "seed": args.seed},
        "output": {"format": args.format,
                   "path": str(args.output) if args.output is not None else None},
    }


def error_envelope(command: str, config: dict[str, Any], exc: HHError) -> ReportEnvelope:
    entry: dict[str, Any] = {"type": type(exc).__name__, "message": str(exc),
                             "exit_code": exc.exit_code}
    if isinstance(exc, ConfigError):
        entry["failures"] = [{"field": r.field, "message": r.message} for r in exc.failures]
    partial = getattr(exc, "partial", None)
    if partial is not None:
        entry["partial"] = partial.to_dict()
    s_range = getattr(exc, "s_range", None)
    if s_range is not None:
        entry["s_range"] = [json_float(x) for x in s_range]
    return ReportEnvelope(command, config, {}, errors=[entry], exit_code=exc.exit_code)


def run_command(command: str, config: dict[str, Any]) -> ReportEnvelope:
    """Run one subcommand on a resolved config; library errors become error envelopes"""
    handler, _ = COMMANDS[command]
    try:
        return handler(config)
    except HHError as exc:
        logger.error(f"{command} failed: {exc}")
        return error_envelope(command, config, exc)


def emit(envelope: ReportEnvelope, fmt: str, path: str | None) -> None:
    text = envelope.to_csv() if fmt == "csv" and envelope.rows and not envelope.errors \
        else envelope.to_json() + "\n"
    if path:
        Path(path).write_text(text)
        logger.info(f"report written to {path}")
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(getattr(logging, args.log_level),
                  log_to_file=args.log_file is not None, log_file=args.log_file)

    try:
        config = validate_config_on_startup(args.config, overrides_from_args(args))
    except ConfigError as exc:
        logger.error(str(exc))
        envelope = error_envelope(args.command, {}, exc)
        emit(envelope, "json", None)
        return envelope.exit_code

    envelope = run_command(args.command, config)
    emit(envelope, config["output"]["format"], config["output"]["path"])
    if envelope.exit_code != ExitCodes.OK and not envelope.errors:
        logger.error(f"{args.command} finished with exit code {envelope.exit_code}")
    return envelope.exit_code
