"""Pytest configuration and shared fixtures"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable

import pytest

# Modules live at the repository root
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from group import HomogeneousGroup, NormKind  # noqa: E402
from logger import ROOT_LOGGER  # noqa: E402
from quad import Tolerance  # noqa: E402


@pytest.fixture(autouse=True)
def reset_logging():
    """Drop handlers bound to a previous test's captured streams"""
    yield
    root = logging.getLogger(ROOT_LOGGER)
    for handler in root.handlers:
        handler.close()
    root.handlers.clear()


# ============================================================================
# Groups and tolerances
# ============================================================================

@pytest.fixture
def half_line() -> HomogeneousGroup:
    """(0, inf) with |S| = 1"""
    return HomogeneousGroup.half_line()


@pytest.fixture
def heisenberg_like() -> HomogeneousGroup:
    """Weights (1, 1, 2) with the max quasi-norm: Q = 4, unit ball = [-1, 1]^3"""
    return HomogeneousGroup((1.0, 1.0, 2.0), NormKind.MAX, mc_samples=200_000, seed=11)


@pytest.fixture
def plane() -> HomogeneousGroup:
    return HomogeneousGroup.euclidean(2)


@pytest.fixture
def tight_tol() -> Tolerance:
    return Tolerance(rel=1e-10, abs=1e-14)


@pytest.fixture
def loose_tol() -> Tolerance:
    """For iterated integrals where 1e-10 would only cost time"""
    return Tolerance(rel=1e-8, abs=1e-13)


# ============================================================================
# Config files
# ============================================================================

@pytest.fixture
def write_config(tmp_path) -> Callable[[dict[str, Any]], Path]:
    """Write a config dict to a JSON file under tmp_path and return its path"""
    def _write(config: dict[str, Any], name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(config))
        return path
    return _write
