"""Defaults and constants for hhsharp"""

from __future__ import annotations

VERSION = "1.0.0"


class QuadDefaults:
    """Adaptive quadrature tolerances"""
    REL_TOL: float = 1e-10
    ABS_TOL: float = 1e-14
    MAX_SUBDIV: int = 2000
    # Inner integrals of iterated quadrature run this much tighter
    INNER_TIGHTEN: float = 0.1
    # Unconverged results with err > DIVERGENCE_REL * |value| count as divergent
    DIVERGENCE_REL: float = 1e-3


class MCDefaults:
    """Monte Carlo settings"""
    SAMPLES: int = 1_000_000
    SEED: int = 42
    MIN_SAMPLES: int = 10_000
    CHUNK_SIZE: int = 250_000
    MAX_WORKERS: int = 1


class SweepDefaults:
    """Sharpness sweep and dilation probe schedules"""
    BETAS: tuple[float, ...] = (0.5, 0.2, 0.1, 0.05, 0.02)
    SCALES: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    RADII: tuple[float, ...] = (0.5, 1.0, 2.0)
    MIN_SCALES: int = 3


class ConjugateGrid:
    """Log-spaced grid for the materialized conjugate function"""
    NODES: int = 4096
    LOWER: float = 1e-6
    UPPER: float = 1e6


class CheckDefaults:
    """Tolerances for the pass/fail checks"""
    HOMOGENEITY_SAMPLES: int = 200
    HOMOGENEITY_TOL: float = 1e-10
    HOMOGENEITY_SEED: int = 7
    HOLDS_SLACK: float = 10.0
    SLOPE_REL_TOL: float = 1e-3
    # Constants from the two defining integrals must agree this closely
    CROSS_CHECK_FACTOR: float = 2.0
    SCALING_REL_TOL: float = 1e-12


class ExitCodes:
    """Process exit codes of the CLI"""
    OK: int = 0
    UNEXPECTED: int = 1
    CHECK_FAILED: int = 2
    PRECONDITION: int = 3
    DIVERGENCE: int = 4
