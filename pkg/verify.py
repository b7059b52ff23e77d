"""Both sides of the Hardy-Hilbert family of inequalities on radial test functions.

A radial function f(x) = phi(|x|) is represented by its profile phi on
(0, inf). Polar coordinates turn every group integral into a radial one with
weight |S| r^(Q-1), so the bilinear form and the Hardy-type operator norms
become one- and two-dimensional integrals over (0, inf).

Orientation: bilinear_form pairs f with the first kernel slot (r) and g with
the second (s); the Hardy operator integrates its argument in the s slot.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import PchipInterpolator

from constants import (SharpConstant, closed_form, relative_deviation,
                       sharp_constant)
from errors import (DivergenceError, InputError, PreconditionError,
                    QuadEvaluationError)
from group import (HomogeneousGroup, NormKind, integrate_radial,
                   quasi_norm_array)
from hh_config import CheckDefaults, ConjugateGrid, MCDefaults, SweepDefaults
from kernels import (Kernel, Num, catalog, compile_guarded, evaluate_array,
                     parse_kernel, to_text, transpose)
from logger import get_logger
from quad import (QuadResult, Tolerance, json_float, integrate_half_line,
                  integrate_half_plane, integrate_row, mc_integrate)

logger = get_logger("verify")


# ============================================================================
# Radial test functions
# ============================================================================

class RadialFunction(ABC):
    """Profile phi of a radial function f(x) = phi(|x|), nonnegative on (0, inf)"""

    @abstractmethod
    def __call__(self, r: float) -> float:
        ...

    @abstractmethod
    def describe(self) -> dict[str, Any]:
        ...

    def evaluate_array(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.array([self(float(x)) for x in r.ravel()]).reshape(r.shape)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Radii where phi has a jump or kink"""
        return ()

    @property
    def is_zero(self) -> bool:
        return False

    def dilated(self, a: float) -> RadialFunction:
        """Profile of f o D_a, i.e. r -> phi(a r)"""
        return DilatedProfile(self, a)


class ExprProfile(RadialFunction):
    """phi given as an expression in r, e.g. "exp(-r)" """

    def __init__(self, text: str, points: Sequence[float] = (),
                 n_samples: int = 100, seed: int = CheckDefaults.HOMOGENEITY_SEED) -> None:
        self.text = text
        self.expr = parse_kernel(text, variables=("r",))
        self._fn = compile_guarded(self.expr)
        self._points = tuple(sorted(float(x) for x in points))
        rng = np.random.default_rng(seed)
        for r in (10.0 ** rng.uniform(-3.0, 3.0, n_samples)).tolist():
            if self._fn(r, 0.0) < 0:
                raise InputError(f"test function {text} is negative at r={r!r}")

    def __call__(self, r: float) -> float:
        return self._fn(r, 0.0)

    def evaluate_array(self, r: np.ndarray) -> np.ndarray:
        return evaluate_array(self.expr, r, 0.0)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self._points

    @property
    def is_zero(self) -> bool:
        return isinstance(self.expr, Num) and self.expr.value == 0

    def describe(self) -> dict[str, Any]:
        return {"expr": to_text(self.expr), "points": list(self._points)}


class PowerCutoff(RadialFunction):
    """
    coef * r^(-Q/p - beta) on (1, upper), zero elsewhere.

    With upper = inf this is the extremizer family whose normalized pairings
    approach the sharp constant as beta -> 0+.
    """

    def __init__(self, beta: float, p: float, Q: float, upper: float | None = None,
                 coef: float = 1.0) -> None:
        if not (math.isfinite(beta) and beta > 0):
            raise InputError(f"PowerCutoff needs beta > 0, got {beta}")
        if not p >= 1:
            raise InputError(f"PowerCutoff exponent p must be >= 1, got {p}")
        if not Q > 0:
            raise InputError(f"PowerCutoff needs Q > 0, got {Q}")
        if upper is not None and not upper > 1:
            raise InputError(f"PowerCutoff upper bound must exceed 1, got {upper}")
        if not coef > 0:
            raise InputError(f"PowerCutoff coefficient must be positive, got {coef}")
        self.beta = float(beta)
        self.p = float(p)
        self.Q = float(Q)
        self.upper = math.inf if upper is None else float(upper)
        self.coef = float(coef)
        self.exponent = -self.Q / self.p - self.beta

    def __call__(self, r: float) -> float:
        if 1.0 < r < self.upper:
            return self.coef * r ** self.exponent
        return 0.0

    def evaluate_array(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        with np.errstate(all="ignore"):
            values = self.coef * np.power(r, self.exponent)
        return np.where((r > 1.0) & (r < self.upper), values, 0.0)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (1.0,) if math.isinf(self.upper) else (1.0, self.upper)

    def norm_closed_form(self, sphere: float) -> float:
        """||f||_p for the untruncated family: coef * (|S| / (beta p))^(1/p)"""
        if math.isfinite(self.upper):
            raise PreconditionError("closed-form norm only for the untruncated family")
        return self.coef * (sphere / (self.beta * self.p)) ** (1.0 / self.p)

    def describe(self) -> dict[str, Any]:
        return {"power_cutoff": {
            "beta": self.beta, "p": self.p, "Q": self.Q,
            "upper": None if math.isinf(self.upper) else self.upper,
            "coef": self.coef,
        }}


class Indicator(RadialFunction):
    """Indicator of a < r < b"""

    def __init__(self, a: float, b: float) -> None:
        if not (a >= 0 and b > a):
            raise InputError(f"indicator needs 0 <= a < b, got ({a}, {b})")
        self.a = float(a)
        self.b = float(b)

    def __call__(self, r: float) -> float:
        return 1.0 if self.a < r < self.b else 0.0

    def evaluate_array(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return ((r > self.a) & (r < self.b)).astype(float)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(x for x in (self.a, self.b) if 0 < x < math.inf)

    def describe(self) -> dict[str, Any]:
        return {"indicator": [self.a, json_float(self.b)]}


class ZeroProfile(RadialFunction):

    def __call__(self, r: float) -> float:
        return 0.0

    def evaluate_array(self, r: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(r))

    @property
    def is_zero(self) -> bool:
        return True

    def dilated(self, a: float) -> RadialFunction:
        return self

    def describe(self) -> dict[str, Any]:
        return {"zero": True}


class DilatedProfile(RadialFunction):
    """r -> base(a r)"""

    def __init__(self, base: RadialFunction, a: float) -> None:
        if not (math.isfinite(a) and a > 0):
            raise InputError(f"dilation factor must be positive, got {a}")
        self.base = base
        self.a = float(a)

    def __call__(self, r: float) -> float:
        return self.base(self.a * r)

    def evaluate_array(self, r: np.ndarray) -> np.ndarray:
        return self.base.evaluate_array(self.a * np.asarray(r, dtype=float))

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(b / self.a for b in self.base.breakpoints)

    @property
    def is_zero(self) -> bool:
        return self.base.is_zero

    def dilated(self, a: float) -> RadialFunction:
        return DilatedProfile(self.base, self.a * a)

    def describe(self) -> dict[str, Any]:
        return {"dilated": {"a": self.a, "base": self.base.describe()}}


class ConjugateProfile(RadialFunction):
    """
    psi(s) = value(s)^exponent, where value(s) is an inner integral.

    Materialized on a log-spaced grid with monotone cubic (PCHIP) interpolation
    in log-log coordinates (linear coordinates when some node value is 0).
    Outside the grid the same log spacing is continued: extension nodes are
    computed on first use, cached, and interpolated linearly in log-log.
    """

    def __init__(self, inner: Callable[[float], QuadResult], exponent: float,
                 lower: float = ConjugateGrid.LOWER, upper: float = ConjugateGrid.UPPER,
                 nodes: int = ConjugateGrid.NODES, points: Sequence[float] = ()) -> None:
        if nodes < 4 or not 0 < lower < upper:
            raise InputError(f"bad conjugate grid: {nodes} nodes on [{lower}, {upper}]")
        self._inner = inner
        self.exponent = float(exponent)
        self._x0 = math.log(lower)
        self._h = (math.log(upper) - self._x0) / (nodes - 1)
        self._n = nodes
        self._points = tuple(points)
        self._cache: dict[int, float] = {}
        self.interp_error = 0.0

        values = np.array([self._node(i) for i in range(nodes)])
        x = self._x0 + self._h * np.arange(nodes)
        self._log = bool(np.all(values > 0))
        y = np.log(values) if self._log else values
        self._pchip = PchipInterpolator(x, y, extrapolate=False)
        # (4, nodes - 1) -> one coefficient row per interval for scalar Horner
        self._coef = self._pchip.c.T.tolist()

    def exact(self, s: float) -> float:
        res = self._inner(s)
        if not math.isfinite(res.value):
            raise DivergenceError(f"inner integral diverged at s={s!r}", partial=res)
        return max(res.value, 0.0) ** self.exponent

    def _grid_point(self, i: int) -> float:
        return math.exp(self._x0 + self._h * i)

    def _node(self, i: int) -> float:
        if i in self._cache:
            return self._cache[i]
        s = self._grid_point(i)
        try:
            value = self.exact(s)
        except DivergenceError as exc:
            raise DivergenceError(
                f"conjugate function: inner integral diverged near s={s:g}",
                partial=exc.partial,
                s_range=(self._grid_point(i - 1), self._grid_point(i + 1))) from None
        self._cache[i] = value
        return value

    def __call__(self, r: float) -> float:
        if r <= 0:
            return 0.0
        pos = (math.log(r) - self._x0) / self._h
        i = math.floor(pos)
        if 0 <= i < self._n - 1:
            t = (pos - i) * self._h
            c3, c2, c1, c0 = self._coef[i]
            y = ((c3 * t + c2) * t + c1) * t + c0
            return math.exp(y) if self._log else max(y, 0.0)
        lo, hi = self._node(i), self._node(i + 1)
        w = pos - i
        if lo > 0 and hi > 0:
            return math.exp((1.0 - w) * math.log(lo) + w * math.log(hi))
        return (1.0 - w) * lo + w * hi

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self._points

    def measure_interp_error(self, probes: int = 64) -> float:
        """Worst relative deviation from exact() at interval midpoints, inside and past the grid"""
        stride = max(1, (self._n - 1) // probes)
        positions = [i + 0.5 for i in range(0, self._n - 1, stride)]
        positions += [-10.5, -1.5, self._n + 0.5, self._n + 9.5]
        peak = max(self._cache.values(), default=0.0)
        worst = 0.0
        for pos in positions:
            s = math.exp(self._x0 + self._h * pos)
            exact = self.exact(s)
            scale = max(abs(exact), 1e-12 * peak)
            if scale > 0:
                worst = max(worst, abs(self(s) - exact) / scale)
        self.interp_error = worst
        return worst

    def describe(self) -> dict[str, Any]:
        return {"conjugate": {
            "exponent": self.exponent, "nodes": self._n,
            "lower": math.exp(self._x0), "upper": self._grid_point(self._n - 1),
            "interp_error": self.interp_error,
        }}


def radial_function(spec: dict[str, Any], p: float, Q: float) -> RadialFunction:
    """
    Build a test function from its config spec.

    p is the Lebesgue exponent the function is measured in; it is the default
    exponent of a power_cutoff spec.
    """
    if not isinstance(spec, dict) or len(spec) != 1 and "expr" not in spec:
        raise InputError(f"bad test function spec {spec!r}")
    if "power_cutoff" in spec:
        args = dict(spec["power_cutoff"])
        return PowerCutoff(args["beta"], args.get("p", p), args.get("Q", Q),
                           args.get("upper"), args.get("coef", 1.0))
    if "indicator" in spec:
        a, b = spec["indicator"]
        return Indicator(float(a), float(b))
    if "expr" in spec:
        return ExprProfile(str(spec["expr"]), spec.get("points", ()))
    if spec.get("zero"):
        return ZeroProfile()
    raise InputError(f"unknown test function spec {spec!r}")


# ============================================================================
# Norms and forms
# ============================================================================

def _zero() -> QuadResult:
    return QuadResult(0.0, 0.0, 0, True)


def lp_norm(f: RadialFunction, p: float, group: HomogeneousGroup,
            tol: Tolerance | None = None) -> QuadResult:
    """(|S| int phi(r)^p r^(Q-1) dr)^(1/p); infinite when the integral diverges"""
    if not p >= 1:
        raise InputError(f"p must be >= 1, got {p}")
    if f.is_zero:
        return _zero()
    try:
        res = integrate_radial(group, lambda r: f(r) ** p, tol, f.breakpoints)
    except (DivergenceError, QuadEvaluationError) as exc:
        logger.warning(f"L^{p:g} norm of {f.describe()} diverges: {exc}")
        return QuadResult.infinite(message=str(exc))
    return res.power(1.0 / p)


def bilinear_form(kernel: Kernel, f: RadialFunction, g: RadialFunction,
                  group: HomogeneousGroup, tol: Tolerance | None = None) -> QuadResult:
    """|S|^2 int int k(r, s) phi(r) psi(s) r^(Q-1) s^(Q-1) dr ds"""
    if f.is_zero or g.is_zero:
        return _zero()
    qm1 = group.Q - 1.0
    try:
        res = integrate_half_plane(
            lambda r, s: kernel(r, s) * g(s) * s ** qm1, tol,
            points_r=f.breakpoints, points_s=g.breakpoints,
            outer=lambda r, inner: f(r) * r ** qm1 * inner,
            skip=lambda r: f(r) == 0)
    except QuadEvaluationError as exc:
        logger.warning(f"bilinear form of {kernel.text} diverges: {exc}")
        return QuadResult.infinite(message=str(exc))
    if res.diverged:
        return QuadResult.infinite(res.evaluations, res.message or "bilinear form diverged")
    sphere = group.sphere_measure
    return res.scaled(sphere * sphere)


def operator_norm_lhs(kernel: Kernel, f: RadialFunction, exponent: float,
                      group: HomogeneousGroup, tol: Tolerance | None = None) -> QuadResult:
    """(|S| int (|S| int k(r, s) phi(s) s^(Q-1) ds)^e r^(Q-1) dr)^(1/e)"""
    if f.is_zero:
        return _zero()
    qm1 = group.Q - 1.0
    sphere = group.sphere_measure
    try:
        res = integrate_half_plane(
            lambda r, s: kernel(r, s) * f(s) * s ** qm1, tol,
            points_r=f.breakpoints, points_s=f.breakpoints,
            outer=lambda r, inner: (sphere * max(inner, 0.0)) ** exponent * r ** qm1,
            outer_gain=exponent)
    except QuadEvaluationError as exc:
        logger.warning(f"Hardy operator norm of {kernel.text} diverges: {exc}")
        return QuadResult.infinite(message=str(exc))
    if res.diverged:
        return QuadResult.infinite(res.evaluations, res.message or "operator norm diverged")
    return res.scaled(sphere).power(1.0 / exponent)


# ============================================================================
# Verification reports
# ============================================================================

@dataclass
class VerificationReport:
    """Both sides of one inequality; ratio = lhs / (constant * rhs_norms)"""
    kind: str
    lhs: float
    rhs_norms: float
    constant: SharpConstant
    ratio: float
    holds: bool
    slack: float
    quad_diagnostics: list[tuple[str, QuadResult]]
    notes: list[str] = field(default_factory=list)
    extras: dict[str, Any] = field(default_factory=dict)

    def diagnostic(self, name: str) -> QuadResult:
        for label, res in self.quad_diagnostics:
            if label == name:
                return res
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "lhs": json_float(self.lhs),
            "rhs_norms": json_float(self.rhs_norms),
            "constant": self.constant.to_dict(),
            "ratio": json_float(self.ratio),
            "holds": self.holds,
            "slack": json_float(self.slack),
            "quad_diagnostics": [{"name": n, **r.to_dict()} for n, r in self.quad_diagnostics],
            "notes": list(self.notes),
            "extras": _plain(self.extras),
        }


def _plain(value: Any) -> Any:
    if hasattr(value, "to_dict"):
        return value.to_dict()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float):
        return json_float(value)
    return value


def _build_report(kind: str, lhs: QuadResult, norms: list[tuple[str, QuadResult]],
                  constant: SharpConstant, tol: Tolerance,
                  extra_diagnostics: Sequence[tuple[str, QuadResult]] = ()) -> VerificationReport:
    diagnostics = [("lhs", lhs)] + list(norms) + list(extra_diagnostics)
    rel_errors = [r.rel_error for _, r in diagnostics
                  if math.isfinite(r.value) and r.value != 0 and math.isfinite(r.rel_error)]
    if constant.quad is not None and constant.is_finite:
        rel_errors.append(constant.quad.rel_error)
    slack = CheckDefaults.HOLDS_SLACK * (tol.rel + math.fsum(rel_errors))
    rhs = math.prod(n.value for _, n in norms)
    notes: list[str] = []

    if not constant.is_finite:
        ratio, holds = math.inf, False
        notes.append("sharp constant is infinite: the inequality cannot hold")
    elif not (math.isfinite(lhs.value) and math.isfinite(rhs)):
        ratio, holds = math.inf, False
        notes.append("a side of the inequality diverged")
    elif lhs.value == 0:
        ratio, holds = 0.0, True
        notes.append("lhs is 0: holds trivially")
    elif rhs == 0:
        ratio, holds = math.inf, False
        notes.append("nonzero lhs with a zero norm")
    else:
        ratio = lhs.value / (constant.value * rhs)
        holds = ratio <= 1.0 + slack
    for name, res in diagnostics:
        if not res.converged and math.isfinite(res.value):
            notes.append(f"{name}: quadrature did not reach tolerance (converged=false)")

    logger.info(f"{kind}: lhs={lhs.value:.12g} rhs_norms={rhs:.12g} C={constant.value:.12g} "
                f"ratio={ratio:.12g} holds={holds}")
    return VerificationReport(kind, lhs.value, rhs, constant, ratio, holds, slack,
                              diagnostics, notes)


def _conjugate(p: float) -> float:
    if not (math.isfinite(p) and p > 1):
        raise InputError(f"p must be a finite real > 1, got {p}")
    return p / (p - 1.0)


def verify_hh(kernel: Kernel, f: RadialFunction, g: RadialFunction, p: float,
              group: HomogeneousGroup, constant: SharpConstant,
              tol: Tolerance | None = None) -> VerificationReport:
    """int int k f g <= C ||f||_p ||g||_q"""
    tol = tol or Tolerance()
    q = _conjugate(p)
    lhs = bilinear_form(kernel, f, g, group, tol)
    return _build_report("hardy_hilbert", lhs,
                         [("norm_f", lp_norm(f, p, group, tol)),
                          ("norm_g", lp_norm(g, q, group, tol))],
                         constant, tol)


def verify_hardy(kernel: Kernel, f: RadialFunction, p: float, group: HomogeneousGroup,
                 constant: SharpConstant, tol: Tolerance | None = None) -> VerificationReport:
    """||T f||_p <= C ||f||_p with T f(x) = int k(|x|, |y|) f(y) dy"""
    tol = tol or Tolerance()
    _conjugate(p)
    lhs = operator_norm_lhs(kernel, f, p, group, tol)
    return _build_report("hardy", lhs, [("norm_f", lp_norm(f, p, group, tol))], constant, tol)


def verify_dual(kernel: Kernel, g: RadialFunction, q: float, group: HomogeneousGroup,
                constant: SharpConstant, tol: Tolerance | None = None) -> VerificationReport:
    """||T g||_q <= C ||g||_q"""
    tol = tol or Tolerance()
    _conjugate(q)
    lhs = operator_norm_lhs(kernel, g, q, group, tol)
    return _build_report("dual", lhs, [("norm_g", lp_norm(g, q, group, tol))], constant, tol)


# ============================================================================
# Conjugate function and the equivalence check
# ============================================================================

def conjugate_function(kernel: Kernel, f: RadialFunction, p: float,
                       group: HomogeneousGroup, tol: Tolerance | None = None,
                       nodes: int = ConjugateGrid.NODES,
                       lower: float = ConjugateGrid.LOWER,
                       upper: float = ConjugateGrid.UPPER) -> RadialFunction:
    """
    psi(s) = (|S| int k(r, s) phi(r) r^(Q-1) dr)^(p-1).

    Raises:
        DivergenceError: the inner integral diverges; s_range brackets the node
    """
    _conjugate(p)
    if f.is_zero:
        return ZeroProfile()
    tol = tol or Tolerance()
    qm1 = group.Q - 1.0
    sphere = group.sphere_measure
    points = f.breakpoints

    def inner(s: float) -> QuadResult:
        try:
            res = integrate_row(lambda r: kernel(r, s) * f(r) * r ** qm1,
                                tol, points + (s,))
        except QuadEvaluationError as exc:
            return QuadResult.infinite(message=str(exc))
        return res.scaled(sphere)

    profile = ConjugateProfile(inner, p - 1.0, lower, upper, nodes, points)
    error = profile.measure_interp_error()
    logger.info(f"conjugate function of {kernel.name}: {nodes} nodes, "
                f"interpolation error {error:.3g}")
    return profile


@dataclass
class EquivalenceReport:
    """The three equivalent inequalities evaluated on one input, plus the tightness residual"""
    hardy_hilbert: VerificationReport
    hardy: VerificationReport
    dual: VerificationReport
    residual: float
    residual_tol: float
    pairing: QuadResult | None
    interp_error: float
    consistent: bool

    @property
    def residual_ok(self) -> bool:
        return self.residual <= self.residual_tol

    def to_dict(self) -> dict[str, Any]:
        return {
            "hardy_hilbert": self.hardy_hilbert.to_dict(),
            "hardy": self.hardy.to_dict(),
            "dual": self.dual.to_dict(),
            "ratios": {
                "hardy_hilbert": json_float(self.hardy_hilbert.ratio),
                "hardy": json_float(self.hardy.ratio),
                "dual": json_float(self.dual.ratio),
            },
            "equality_residual": json_float(self.residual),
            "equality_tolerance": json_float(self.residual_tol),
            "equality_ok": self.residual_ok,
            "pairing": self.pairing.to_dict() if self.pairing else None,
            "interp_error": self.interp_error,
            "consistent": self.consistent,
        }


def conjugate_residual(kernel: Kernel, f: RadialFunction, p: float,
                       group: HomogeneousGroup, hardy_lhs: QuadResult,
                       tol: Tolerance | None = None,
                       nodes: int = ConjugateGrid.NODES) -> tuple[float, float, QuadResult, float]:
    """
    |bilinear_form(k, f, psi) - hardy_lhs^p| for psi = conjugate_function(k, f).

    hardy_lhs is the Hardy operator norm of f under the transposed kernel.

    Returns:
        (residual, tolerance, pairing, interpolation error)
    """
    tol = tol or Tolerance()
    psi = conjugate_function(kernel, f, p, group, tol, nodes)
    pairing = bilinear_form(kernel, f, psi, group, tol)
    target = hardy_lhs.power(p)
    interp_error = getattr(psi, "interp_error", 0.0)
    if not (math.isfinite(pairing.value) and math.isfinite(target.value)):
        return math.inf, 0.0, pairing, interp_error
    residual = abs(pairing.value - target.value)
    allowed = CheckDefaults.HOLDS_SLACK * (
        pairing.err_estimate + target.err_estimate
        + tol.rel * (abs(pairing.value) + abs(target.value))
        + interp_error * abs(pairing.value) + tol.abs)
    return residual, allowed, pairing, interp_error


def equivalence_report(kernel: Kernel, f: RadialFunction, g: RadialFunction, p: float,
                       group: HomogeneousGroup, tol: Tolerance | None = None,
                       constant: SharpConstant | None = None,
                       nodes: int = ConjugateGrid.NODES) -> EquivalenceReport:
    """
    Bilinear, Hardy and dual forms against one constant, C*_p of the transpose.

    The bilinear form pairs f with the r slot, so the Hardy form acting on f
    uses the transposed kernel; the dual form acts on g with k itself.
    """
    tol = tol or Tolerance()
    q = _conjugate(p)
    kt = transpose(kernel)
    if constant is None:
        constant = sharp_constant(kt, p, group, tol)
    hh = verify_hh(kernel, f, g, p, group, constant, tol)
    hardy = verify_hardy(kt, f, p, group, constant, tol)
    dual = verify_dual(kernel, g, q, group, constant, tol)

    residual, allowed, pairing, interp_error = 0.0, 0.0, None, 0.0
    if constant.is_finite and not f.is_zero:
        residual, allowed, pairing, interp_error = conjugate_residual(
            kernel, f, p, group, hardy.diagnostic("lhs"), tol, nodes)

    holds = [hh.holds, hardy.holds, dual.holds]
    consistent = (all(holds) or not constant.is_finite) and residual <= allowed
    if not consistent:
        logger.warning(f"equivalent forms disagree: holds={holds} residual={residual:.3g} "
                       f"(allowed {allowed:.3g})")
    return EquivalenceReport(hh, hardy, dual, residual, allowed, pairing,
                             interp_error, consistent)


# ============================================================================
# Sharpness sweep
# ============================================================================

@dataclass
class SweepEntry:
    beta: float
    ratio: float
    lower_bound: QuadResult
    converged: bool
    flagged: bool
    pairing_ratio: float | None = None
    message: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "beta": self.beta,
            "ratio": json_float(self.ratio),
            "lower_bound": self.lower_bound.to_dict(),
            "converged": self.converged,
            "flagged": self.flagged,
            "pairing_ratio": None if self.pairing_ratio is None else json_float(self.pairing_ratio),
            "message": self.message,
        }


@dataclass
class SweepResult:
    constant: SharpConstant
    entries: list[SweepEntry]
    monotone: bool
    approaches: bool
    bounded: bool
    slack: float

    @property
    def passed(self) -> bool:
        return self.monotone and self.approaches and self.bounded

    def to_dict(self) -> dict[str, Any]:
        return {
            "constant": self.constant.to_dict(),
            "entries": [e.to_dict() for e in self.entries],
            "monotone": self.monotone,
            "approaches": self.approaches,
            "bounded": self.bounded,
            "slack": self.slack,
            "passed": self.passed,
        }


def _sweep_entry(kernel: Kernel, beta: float, p: float, group: HomogeneousGroup,
                 constant: SharpConstant, tol: Tolerance, pairing: bool) -> SweepEntry:
    Q, sphere = group.Q, group.sphere_measure
    bp = beta * p
    exponent = Q - 1.0 - Q / p - beta
    try:
        bound = integrate_half_line(
            lambda t: kernel(1.0, t) * t ** exponent * min(1.0, t) ** bp, tol).scaled(sphere)
    except QuadEvaluationError as exc:
        bound = QuadResult.infinite(message=str(exc))
    flagged = bound.diverged
    ratio = math.inf if flagged else bound.value / constant.value
    entry = SweepEntry(beta, ratio, bound, bound.converged and not flagged, flagged,
                       message=bound.message)
    if pairing and not flagged:
        q = p / (p - 1.0)
        f_beta = PowerCutoff(beta, p, Q)
        psi = PowerCutoff(bp / q, q, Q, coef=(bp / sphere) ** (1.0 / q))
        form = bilinear_form(kernel, psi, f_beta, group, tol)
        norms = lp_norm(f_beta, p, group, tol).value * lp_norm(psi, q, group, tol).value
        entry.pairing_ratio = form.value / (norms * constant.value)
    if flagged:
        logger.warning(f"sharpness sweep: entry beta={beta:g} diverged")
    return entry


def sharpness_sweep(kernel: Kernel, p: float, group: HomogeneousGroup,
                    betas: Sequence[float] = SweepDefaults.BETAS,
                    tol: Tolerance | None = None, pairing: bool = False,
                    max_workers: int = 1,
                    constant: SharpConstant | None = None) -> SweepResult:
    """
    Lower bounds |S| int k(1, t) t^(Q-1-Q/p-beta) min(1, t)^(beta p) dt over C*_p.

    Entries are computed independently (concurrently when max_workers > 1) and
    returned in the order of betas. Divergent entries are flagged, not raised.
    """
    tol = tol or Tolerance()
    _conjugate(p)
    betas = [float(b) for b in betas]
    if not betas or any(not b > 0 for b in betas):
        raise InputError(f"betas must be positive, got {betas}")
    if any(b2 >= b1 for b1, b2 in zip(betas, betas[1:])):
        raise InputError(f"betas must be strictly decreasing, got {betas}")
    if constant is None:
        constant = sharp_constant(kernel, p, group, tol)
    if not constant.is_finite:
        raise PreconditionError(f"sharp constant of {kernel.text} is infinite; nothing to approach")

    def run(beta: float) -> SweepEntry:
        return _sweep_entry(kernel, beta, p, group, constant, tol, pairing)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            entries = list(pool.map(run, betas))
    else:
        entries = [run(b) for b in betas]

    rel = tol.rel + (constant.quad.rel_error if constant.quad is not None else 0.0)
    slack = 2.0 * rel
    good = [e for e in entries if not e.flagged]
    monotone = all(b.ratio >= a.ratio - slack for a, b in zip(good, good[1:]))
    bounded = all(e.ratio <= 1.0 + CheckDefaults.HOLDS_SLACK * rel for e in good)
    if len(good) < 2:
        approaches = bool(good)
    else:
        approaches = good[-1].ratio > good[0].ratio
    logger.info(f"sharpness sweep of {kernel.name} (p={p:g}): "
                f"ratios {[round(e.ratio, 6) for e in entries]}")
    return SweepResult(constant, entries, monotone, approaches, bounded, slack)


# ============================================================================
# Dilation probe
# ============================================================================

@dataclass
class ProbeResult:
    order: float
    Q: float
    entries: list[dict[str, Any]]
    slope: float
    intercept: float
    expected_slope: float

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.slope):
            return False
        allowed = CheckDefaults.SLOPE_REL_TOL * max(1.0, abs(self.expected_slope))
        return abs(self.slope - self.expected_slope) <= allowed

    def to_dict(self) -> dict[str, Any]:
        return {
            "order": self.order,
            "Q": self.Q,
            "entries": _plain(self.entries),
            "slope": json_float(self.slope),
            "intercept": json_float(self.intercept),
            "expected_slope": self.expected_slope,
            "passed": self.passed,
        }


def dilation_probe(kernel: Kernel, f: RadialFunction, g: RadialFunction, p: float,
                   group: HomogeneousGroup,
                   scales: Sequence[float] = SweepDefaults.SCALES,
                   tol: Tolerance | None = None) -> ProbeResult:
    """
    ratio(a) = bilinear(f o D_a, g o D_a) / (||f o D_a||_p ||g o D_a||_q).

    For a kernel of order lam the ratio scales as a^-(Q + lam); the fitted
    log-log slope is compared with -(Q + lam).
    """
    tol = tol or Tolerance()
    q = _conjugate(p)
    order = kernel.order
    scales = [float(a) for a in scales]
    if len(scales) < SweepDefaults.MIN_SCALES or any(not a > 0 for a in scales):
        raise InputError(f"need at least {SweepDefaults.MIN_SCALES} positive scales, got {scales}")

    entries: list[dict[str, Any]] = []
    for a in scales:
        fa, ga = f.dilated(a), g.dilated(a)
        form = bilinear_form(kernel, fa, ga, group, tol)
        norms = lp_norm(fa, p, group, tol).value * lp_norm(ga, q, group, tol).value
        flagged = not (math.isfinite(form.value) and math.isfinite(norms) and norms > 0
                       and form.value > 0)
        ratio = math.inf if flagged else form.value / norms
        entries.append({"a": a, "ratio": ratio, "converged": form.converged,
                        "flagged": flagged})

    usable = [e for e in entries if not e["flagged"]]
    expected = -(group.Q + order)
    if len(usable) < SweepDefaults.MIN_SCALES:
        logger.warning(f"dilation probe: only {len(usable)} usable scales")
        return ProbeResult(order, group.Q, entries, math.nan, math.nan, expected)
    x = np.log([e["a"] for e in usable])
    y = np.log([e["ratio"] for e in usable])
    slope, intercept = np.polyfit(x, y, 1)
    logger.info(f"dilation probe of {kernel.name}: slope {slope:.6g} (expected {expected:.6g})")
    return ProbeResult(order, group.Q, entries, float(slope), float(intercept), expected)


# ============================================================================
# Reduced group forms
# ============================================================================

def _reduced_form(f: RadialFunction, g: RadialFunction, p: float, group: HomogeneousGroup,
                  tol: Tolerance, lam: float = 1.0) -> QuadResult:
    """(Q/|S|) int int F(r) G(s) / (r^lam + s^lam) with F = r^((Q-1)/p) |S| phi"""
    if f.is_zero or g.is_zero:
        return _zero()
    q = p / (p - 1.0)
    Q, sphere = group.Q, group.sphere_measure
    fp, gq = (Q - 1.0) / p, (Q - 1.0) / q
    try:
        res = integrate_half_plane(
            lambda r, s: s ** gq * sphere * g(s) / (r ** lam + s ** lam), tol,
            points_r=f.breakpoints, points_s=g.breakpoints, diagonal=False,
            outer=lambda r, inner: r ** fp * sphere * f(r) * inner,
            skip=lambda r: f(r) == 0)
    except QuadEvaluationError as exc:
        return QuadResult.infinite(message=str(exc))
    if res.diverged:
        return QuadResult.infinite(res.evaluations, res.message or "reduced form diverged")
    return res.scaled(Q / sphere)


def group_weighted_kernel(p: float, group: HomogeneousGroup) -> Kernel:
    """The catalog kernel c r^((1-Q)/q) s^((1-Q)/p)/(r+s) with c = Q/|S|"""
    return catalog("group_weighted_hilbert", p=p, Q=group.Q, c=group.Q / group.sphere_measure)


def verify_theorem31(f: RadialFunction, g: RadialFunction, p: float,
                     group: HomogeneousGroup, tol: Tolerance | None = None,
                     forms: bool = False) -> VerificationReport:
    """
    Group Hilbert inequality with constant Q pi / sin(pi/p), via the radial reduction.

    With forms=True the Hardy and dual forms are evaluated through the
    group-weighted Hilbert kernel and attached under extras["forms"]. On a
    Euclidean group the R^n version (constant scaled by the unit-ball volume)
    is attached under extras["euclidean"].
    """
    tol = tol or Tolerance()
    q = _conjugate(p)
    constant = closed_form("group_hilbert", Q=group.Q, p=p)
    lhs = _reduced_form(f, g, p, group, tol)
    report = _build_report("theorem31", lhs,
                           [("norm_f", lp_norm(f, p, group, tol)),
                            ("norm_g", lp_norm(g, q, group, tol))],
                           constant, tol)

    if forms:
        kernel = group_weighted_kernel(p, group)
        report.extras["forms"] = {
            "hardy": verify_hardy(transpose(kernel), f, p, group, constant, tol),
            "dual": verify_dual(kernel, g, q, group, constant, tol),
        }
    if group.norm is NormKind.EUCLIDEAN and group.sphere_measure_override is None:
        n = group.N
        ball = closed_form("rn_hilbert", n=n, p=p).value / constant.value
        lhs_rn = ball * report.lhs
        rn_constant = closed_form("rn_hilbert", n=n, p=p)
        if lhs_rn == 0:
            ratio_rn = 0.0
        elif math.isfinite(lhs_rn) and report.rhs_norms > 0 and math.isfinite(report.rhs_norms):
            ratio_rn = lhs_rn / (rn_constant.value * report.rhs_norms)
        else:
            ratio_rn = math.inf
        report.extras["euclidean"] = {
            "n": n,
            "unit_ball_volume": ball,
            "lhs": lhs_rn,
            "constant": rn_constant.value,
            "ratio": ratio_rn,
            "deviation": relative_deviation(ratio_rn, report.ratio),
        }
    return report


def verify_prop35(f: RadialFunction, g: RadialFunction, p: float, lam: float, k_exp: float,
                  group: HomogeneousGroup, tol: Tolerance | None = None) -> VerificationReport:
    """
    (Q/|S|) int int F G / (r^lam + s^lam) <= Q pi / (lam sin(pi/m)) ||f||_w ||g||_w

    with the weighted norms (|S| int r^(p(1-lam/k)-1) phi^p r^(Q-1))^(1/p) and
    (|S| int s^(q(1-lam/m)-1) psi^q s^(Q-1))^(1/q), m the conjugate of k_exp.
    """
    tol = tol or Tolerance()
    q = _conjugate(p)
    m = _conjugate(k_exp)
    if not lam > 0:
        raise InputError(f"lambda must be positive, got {lam}")
    constant = closed_form("prop35", Q=group.Q, lam=lam, m=m)
    lhs = _reduced_form(f, g, p, group, tol, lam)
    wf = p * (1.0 - lam / k_exp) - 1.0
    wg = q * (1.0 - lam / m) - 1.0
    norms = [
        ("weighted_norm_f", _weighted_norm(f, p, wf, group, tol)),
        ("weighted_norm_g", _weighted_norm(g, q, wg, group, tol)),
    ]
    report = _build_report("prop35", lhs, norms, constant, tol)
    report.extras["params"] = {"lam": lam, "k_exp": k_exp, "m": m}
    return report


def _weighted_norm(f: RadialFunction, exponent: float, weight: float,
                   group: HomogeneousGroup, tol: Tolerance) -> QuadResult:
    if f.is_zero:
        return _zero()
    try:
        res = integrate_radial(group, lambda r: r ** weight * f(r) ** exponent, tol,
                               f.breakpoints)
    except (DivergenceError, QuadEvaluationError) as exc:
        logger.warning(f"weighted norm diverges: {exc}")
        return QuadResult.infinite(message=str(exc))
    return res.power(1.0 / exponent)


# ============================================================================
# Monte Carlo cross-check of the radial reduction
# ============================================================================

def bilinear_form_mc(kernel: Kernel, f: RadialFunction, g: RadialFunction,
                     group: HomogeneousGroup, n_samples: int = MCDefaults.SAMPLES,
                     seed: int = MCDefaults.SEED, radius: float = 2.0,
                     chunk_size: int | None = MCDefaults.CHUNK_SIZE) -> QuadResult:
    """
    Direct 2N-dimensional Monte Carlo of int int k(|x|, |y|) f(x) g(y) dx dy.

    f and g must vanish for |x| >= radius; the sampling box is
    prod_i [-radius^v_i, radius^v_i] in each of x and y.
    """
    if not radius > 0:
        raise InputError(f"radius must be positive, got {radius}")
    probe = np.array([radius * (1.0 + 1e-9), 2.0 * radius, 10.0 * radius, 1e3 * radius])
    if np.any(f.evaluate_array(probe) != 0) or np.any(g.evaluate_array(probe) != 0):
        raise InputError(f"test functions must vanish beyond radius {radius}")
    n = group.N
    box = [(-radius ** v, radius ** v) for v in group.weights] * 2

    def integrand(points: np.ndarray) -> np.ndarray:
        rx = quasi_norm_array(group, points[:, :n])
        ry = quasi_norm_array(group, points[:, n:])
        fx = f.evaluate_array(rx)
        gy = g.evaluate_array(ry)
        mask = (fx != 0) & (gy != 0)
        values = np.zeros(len(points))
        values[mask] = kernel.evaluate_array(rx[mask], ry[mask]) * fx[mask] * gy[mask]
        return values

    res = mc_integrate(integrand, box, n_samples, seed, chunk_size)
    logger.info(f"bilinear form by Monte Carlo: {res.value:.8g} +- {res.err_estimate:.2g} "
                f"({n_samples} samples)")
    return res
