"""Numerical integration engine.

Improper integrals over (0, inf) are split at 1 (and at any extra
breakpoints); the tail [b, inf) is mapped onto (0, 1/b] by s = 1/u so that
algebraic decay at infinity becomes an endpoint singularity, which the
QUADPACK extrapolating rule (scipy.integrate.quad) handles well.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, special

from errors import InputError, QuadEvaluationError
from hh_config import MCDefaults, QuadDefaults
from logger import get_logger

logger = get_logger("quad")

ScalarFn = Callable[[float], float]
PlaneFn = Callable[[float, float], float]
ArrayFn = Callable[[np.ndarray], np.ndarray]

# QUADPACK ier codes recovered from scipy's message text; first match wins
_STATUS_MARKERS: tuple[tuple[str, int], ...] = (
    ("maximum number", 1),
    ("extrapolation table", 4),
    ("roundoff", 2),
    ("bad integrand", 3),
    ("divergent", 5),
    ("abnormal", 7),
)


@dataclass(frozen=True)
class Tolerance:
    """Error targets for adaptive quadrature"""
    rel: float = QuadDefaults.REL_TOL
    abs: float = QuadDefaults.ABS_TOL
    max_subdiv: int = QuadDefaults.MAX_SUBDIV

    def __post_init__(self) -> None:
        if not (self.rel > 0 and self.abs > 0):
            raise InputError(f"tolerances must be positive, got rel={self.rel} abs={self.abs}")
        if self.max_subdiv < 1:
            raise InputError(f"max_subdiv must be >= 1, got {self.max_subdiv}")

    def tightened(self, factor: float) -> Tolerance:
        """Same tolerance scaled by factor (rel is kept above 1e-14)"""
        return replace(self, rel=max(self.rel * factor, 1e-14), abs=self.abs * factor)

    def to_dict(self) -> dict[str, float | int]:
        return {"rel": self.rel, "abs": self.abs, "max_subdiv": self.max_subdiv}


@dataclass(frozen=True)
class QuadResult:
    """Value of an integral with its error estimate and provenance"""
    value: float
    err_estimate: float
    evaluations: int
    converged: bool
    status: int = 0
    message: str = ""

    @property
    def rel_error(self) -> float:
        if self.value == 0:
            return 0.0 if self.err_estimate == 0 else math.inf
        return self.err_estimate / abs(self.value)

    @property
    def diverged(self) -> bool:
        """True when the integral should be treated as infinite"""
        if not (math.isfinite(self.value) and math.isfinite(self.err_estimate)):
            return True
        if self.converged:
            return False
        return (self.status == 5
                or self.err_estimate > QuadDefaults.DIVERGENCE_REL * abs(self.value))

    def scaled(self, factor: float) -> QuadResult:
        return replace(self, value=self.value * factor,
                       err_estimate=self.err_estimate * abs(factor))

    def power(self, exponent: float) -> QuadResult:
        """value**exponent with first-order error propagation"""
        if not math.isfinite(self.value):
            return replace(self, value=math.inf)
        if self.value == 0:
            return replace(self, value=0.0, err_estimate=0.0)
        value = self.value ** exponent
        err = abs(exponent) * abs(value / self.value) * self.err_estimate
        return replace(self, value=value, err_estimate=err)

    def to_dict(self) -> dict[str, object]:
        return {
            "value": json_float(self.value),
            "err_estimate": json_float(self.err_estimate),
            "evaluations": self.evaluations,
            "converged": self.converged,
            "status": self.status,
        }

    @classmethod
    def infinite(cls, evaluations: int = 0, message: str = "") -> QuadResult:
        return cls(math.inf, math.inf, evaluations, False, 5, message)


def json_float(x: float) -> float | str:
    """JSON has no inf/nan; encode them as strings"""
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _status_from_message(message: str) -> int:
    text = message.lower()
    for marker, status in _STATUS_MARKERS:
        if marker in text:
            return status
    return 7


def _checked(fn: ScalarFn) -> ScalarFn:
    def wrapped(x: float) -> float:
        y = fn(x)
        if not math.isfinite(y):
            raise QuadEvaluationError(x, y)
        return y
    return wrapped


def _tail(fn: ScalarFn) -> ScalarFn:
    """Integrand on (0, 1/b] for the substitution s = 1/u"""
    def mapped(u: float) -> float:
        s = 1.0 / u
        y = fn(s)
        if not math.isfinite(y):
            raise QuadEvaluationError(s, y)
        out = y * s * s
        if not math.isfinite(out):
            raise QuadEvaluationError(s, out)
        return out
    return mapped


def _quad_piece(fn: ScalarFn, a: float, b: float, rel: float, abs_tol: float,
                limit: int) -> tuple[float, float, int, int, str]:
    out = integrate.quad(fn, a, b, epsabs=abs_tol, epsrel=rel,
                         limit=limit, full_output=1)
    value, err, info = out[0], out[1], out[2]
    message = out[3] if len(out) > 3 else ""
    status = _status_from_message(message) if message else 0
    return float(value), float(err), int(info.get("neval", 0)), status, message


def _breakpoints(points: Sequence[float]) -> list[float]:
    pts = {1.0}
    for p in points:
        p = float(p)
        if math.isfinite(p) and p > 0:
            pts.add(p)
    return sorted(pts)


def integrate_half_line(f: ScalarFn, tol: Tolerance | None = None,
                        points: Sequence[float] = ()) -> QuadResult:
    """
    Integrate f over (0, inf).

    Args:
        f: Integrand, finite on (0, inf) apart from algebraic behaviour at the ends
        tol: Error targets (defaults from QuadDefaults)
        points: Extra breakpoints where f has kinks or jumps

    Returns:
        QuadResult; converged is False (never raised) when the subdivision
        budget runs out or QUADPACK flags trouble

    Raises:
        QuadEvaluationError: f returned NaN or Inf at a quadrature node
    """
    tol = tol or Tolerance()
    cuts = _breakpoints(points)
    edges = [0.0] + cuts
    n_pieces = len(edges)
    piece_abs = tol.abs / n_pieces
    finite_fn = _checked(f)

    total = err = 0.0
    evaluations = 0
    status = 0
    messages: list[str] = []
    all_ok = True

    pieces: list[tuple[ScalarFn, float, float]] = [
        (finite_fn, a, b) for a, b in zip(edges[:-1], edges[1:])
    ]
    pieces.append((_tail(f), 0.0, 1.0 / cuts[-1]))

    for fn, a, b in pieces:
        value, piece_err, neval, piece_status, message = _quad_piece(
            fn, a, b, tol.rel, piece_abs, tol.max_subdiv)
        total += value
        err += piece_err
        evaluations += neval
        if piece_status:
            ok = piece_err <= max(tol.rel * abs(value), piece_abs)
            all_ok = all_ok and ok
            status = max(status, piece_status)
            messages.append(message.strip().splitlines()[0])
            logger.debug(f"piece [{a:g}, {b:g}] status {piece_status}: {message.strip()}")

    converged = all_ok and err <= max(tol.rel * abs(total), tol.abs)
    if not converged:
        logger.debug(f"half-line integral unconverged: value={total!r} err={err!r}")
    return QuadResult(total, err, evaluations, converged, status, "; ".join(messages))


class _InnerDiverged(Exception):
    pass


def integrate_row(fn: ScalarFn, tol: Tolerance | None = None,
                  points: Sequence[float] = ()) -> QuadResult:
    """
    Inner integral of an iterated quadrature; QuadResult.infinite when it diverges.

    QUADPACK raises status 5 on some convergent integrals whose value is tiny
    next to the integrand's scale. An unconverged finite result is
    recomputed with four times the subdivision limit; it counts as divergent
    only when it is non-finite, its error stays above DIVERGENCE_REL of its
    value, or the value moves by more than the two error estimates allow.
    An accepted result keeps converged=False and its QUADPACK status.
    """
    tol = tol or Tolerance()
    try:
        return _refined_row(fn, tol, points)
    except _InnerDiverged:
        return QuadResult.infinite(message="inner integral diverged under refinement")


def _refined_row(fn: ScalarFn, tol: Tolerance, points: Sequence[float]) -> QuadResult:
    res = integrate_half_line(fn, tol, points)
    if res.converged:
        return res
    if not (math.isfinite(res.value) and math.isfinite(res.err_estimate)):
        raise _InnerDiverged
    retry = integrate_half_line(fn, replace(tol, max_subdiv=4 * tol.max_subdiv), points)
    if not (math.isfinite(retry.value) and math.isfinite(retry.err_estimate)):
        raise _InnerDiverged
    best = retry if retry.err_estimate <= res.err_estimate else res
    spread = abs(retry.value - res.value)
    if (best.err_estimate > QuadDefaults.DIVERGENCE_REL * abs(best.value) + tol.abs
            or spread > 10.0 * (res.err_estimate + retry.err_estimate) + tol.abs):
        raise _InnerDiverged
    return replace(best, evaluations=res.evaluations + retry.evaluations)


def integrate_half_plane(f: PlaneFn, tol: Tolerance | None = None,
                         points_r: Sequence[float] = (),
                         points_s: Sequence[float] = (),
                         diagonal: bool = True,
                         outer: Callable[[float, float], float] | None = None,
                         outer_gain: float = 1.0,
                         skip: Callable[[float], bool] | None = None) -> QuadResult:
    """
    Iterated integral over (0, inf)^2, inner in s, outer in r.

    Computes int outer(r, int f(r, s) ds) dr, where outer defaults to the
    identity in its second argument. The diagonal s = r is added to the inner
    breakpoints unless diagonal is False. Rows with skip(r) true contribute 0
    without an inner integral.

    The error estimate adds the outer estimate to outer_gain times the worst
    inner relative error applied to the value (outer_gain is the exponent when
    outer raises the inner value to a power). Rows that only met the looser
    acceptance of integrate_row are charged locally instead: outer_gain times
    their relative error times the row's outer integrand over a window of
    width max(r, 1). A result that still counts as diverged comes back as
    QuadResult.infinite.
    """
    tol = tol or Tolerance()
    inner_tol = tol.tightened(QuadDefaults.INNER_TIGHTEN)
    inner_stats = {"evaluations": 0, "worst_rel": 0.0, "status": 0,
                   "accepted_err": 0.0, "accepted_rows": 0}

    def row(r: float) -> float:
        if skip is not None and skip(r):
            return 0.0
        pts = tuple(points_s) + ((r,) if diagonal else ())
        res = integrate_row(lambda s: f(r, s), inner_tol, pts)
        if math.isinf(res.value):
            raise _InnerDiverged(r)
        inner_stats["evaluations"] += res.evaluations
        value = res.value if outer is None else outer(r, res.value)
        if res.converged:
            if res.value != 0:
                inner_stats["worst_rel"] = max(inner_stats["worst_rel"], res.rel_error)
            inner_stats["status"] = max(inner_stats["status"], res.status)
        else:
            if res.value != 0:
                local = outer_gain * res.rel_error * abs(value) * max(r, 1.0)
            else:
                local = res.err_estimate * max(r, 1.0)
            inner_stats["accepted_err"] = max(inner_stats["accepted_err"], local)
            inner_stats["accepted_rows"] += 1
        return value

    try:
        res = integrate_half_line(row, tol.tightened(0.5), points_r)
    except _InnerDiverged as exc:
        logger.warning(f"inner integral diverged at r={exc.args[0]:g}")
        return QuadResult.infinite(inner_stats["evaluations"],
                                   f"inner integral diverged at r={exc.args[0]:g}")

    if inner_stats["accepted_rows"]:
        logger.debug(f"{inner_stats['accepted_rows']} inner rows accepted after refinement, "
                     f"charged error {inner_stats['accepted_err']:.3g}")
    err = (res.err_estimate + outer_gain * inner_stats["worst_rel"] * abs(res.value)
           + inner_stats["accepted_err"])
    converged = res.converged and err <= max(tol.rel * abs(res.value), tol.abs)
    out = QuadResult(res.value, err, inner_stats["evaluations"], converged,
                     max(res.status, inner_stats["status"]), res.message)
    if out.diverged:
        logger.warning(f"iterated integral diverged: value={out.value!r} err={out.err_estimate!r}")
        return QuadResult.infinite(out.evaluations, out.message or "iterated integral diverged")
    return out


def _chunk_moments(f: ArrayFn, lo: np.ndarray, width: np.ndarray, n: int,
                   seed: np.random.SeedSequence | int) -> tuple[int, float, float]:
    rng = np.random.default_rng(seed)
    x = lo + width * rng.random((n, lo.size))
    vals = np.asarray(f(x), dtype=float)
    mean = float(vals.mean())
    m2 = float(((vals - mean) ** 2).sum())
    return n, mean, m2


def mc_integrate(f: ArrayFn, box: Sequence[tuple[float, float]], n_samples: int,
                 seed: int = MCDefaults.SEED, chunk_size: int | None = None,
                 max_workers: int = MCDefaults.MAX_WORKERS) -> QuadResult:
    """
    Plain Monte Carlo over a box: volume * mean, with the sample standard error.

    f receives an (n, N) array of points and returns n values. With chunking,
    chunk i draws from SeedSequence(seed).spawn(...)[i] and chunks are merged
    in index order, so the result only depends on (n_samples, seed, chunk_size).
    """
    if n_samples < 2:
        raise InputError(f"n_samples must be >= 2, got {n_samples}")
    bounds = np.asarray(box, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise InputError("box must be a sequence of (lo, hi) pairs with lo < hi")
    lo = bounds[:, 0]
    width = bounds[:, 1] - bounds[:, 0]
    volume = float(np.prod(width))

    if chunk_size is None or chunk_size >= n_samples:
        parts = [_chunk_moments(f, lo, width, n_samples, seed)]
    else:
        if chunk_size < 2:
            raise InputError(f"chunk_size must be >= 2, got {chunk_size}")
        sizes = [chunk_size] * (n_samples // chunk_size)
        if n_samples % chunk_size:
            sizes.append(n_samples % chunk_size)
        seeds = np.random.SeedSequence(seed).spawn(len(sizes))
        jobs = list(zip(sizes, seeds))
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                parts = list(pool.map(lambda job: _chunk_moments(f, lo, width, *job), jobs))
        else:
            parts = [_chunk_moments(f, lo, width, n, s) for n, s in jobs]

    # Chan et al. pairwise merge, in chunk order
    n_tot, mean, m2 = parts[0]
    for n_b, mean_b, m2_b in parts[1:]:
        n_new = n_tot + n_b
        delta = mean_b - mean
        mean = mean + delta * n_b / n_new
        m2 = m2 + m2_b + delta * delta * n_tot * n_b / n_new
        n_tot = n_new

    variance = m2 / (n_tot - 1)
    err = volume * math.sqrt(variance / n_tot)
    logger.debug(f"mc_integrate: n={n_tot} volume={volume:g} mean={mean:g} err={err:g}")
    return QuadResult(volume * mean, err, n_tot, True)


def gamma_fn(x: float) -> float:
    """Gamma function for x > 0"""
    if not (math.isfinite(x) and x > 0):
        raise InputError(f"gamma_fn requires a finite x > 0, got {x}")
    return float(special.gamma(x))
