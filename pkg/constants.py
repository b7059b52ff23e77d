"""Sharp constants C*_p: numeric quadrature and the closed-form catalog.

C*_p is stored as the Hardy-Hilbert constant itself (not its p-th power);
callers raise it to a power where an unnormalized inequality needs it. An
infinite C*_p is a result, not an error: it is exactly the case in which the
inequality fails.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

from errors import InputError, PreconditionError
from group import HomogeneousGroup
from hh_config import CheckDefaults
from kernels import Kernel, check_homogeneity
from logger import get_logger
from quad import QuadResult, Tolerance, gamma_fn, integrate_half_line

logger = get_logger("constants")

CLASSICAL = "classical"
GROUP = "group"
NUMERIC = "numeric_quadrature"
CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class SharpConstant:
    """A sharp constant with its provenance"""
    value: float
    mode: str
    p: float | None
    source: str
    quad: QuadResult | None = None
    case: str = ""
    params: tuple[tuple[str, float], ...] = field(default=())
    cross_check: QuadResult | None = None

    @property
    def q(self) -> float | None:
        if self.p is None:
            return None
        return self.p / (self.p - 1.0)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    @property
    def err_estimate(self) -> float:
        return self.quad.err_estimate if self.quad is not None else 0.0

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "value": self.value if self.is_finite else "inf",
            "mode": self.mode,
            "p": self.p,
            "q": self.q,
            "source": self.source,
            "err_estimate": self.err_estimate if math.isfinite(self.err_estimate) else "inf",
            "case": self.case,
            "params": dict(self.params),
        }
        if self.quad is not None:
            out["quad"] = self.quad.to_dict()
        if self.cross_check is not None:
            out["cross_check"] = self.cross_check.to_dict()
        return out


def relative_deviation(a: float, b: float) -> float:
    if a == b:
        return 0.0
    if not (math.isfinite(a) and math.isfinite(b)):
        return math.inf
    return abs(a - b) / max(abs(a), abs(b))


def _validate_p(p: float) -> float:
    if not (math.isfinite(p) and p > 1):
        raise InputError(f"p must be a finite real > 1, got {p}")
    return float(p)


def _require_order(kernel: Kernel, order: float, mode: str) -> None:
    claimed = kernel.claimed_order
    if claimed is None:
        report = check_homogeneity(kernel, order)
        if report.passed:
            return
        raise PreconditionError(
            f"{mode} mode needs a kernel homogeneous of order {order:g}; "
            f"{kernel.text} fails the check (max deviation {report.max_rel_dev:.3g})")
    if abs(claimed - order) > 1e-12 * max(1.0, abs(order)):
        raise PreconditionError(
            f"{mode} mode needs a kernel of order {order:g}, "
            f"{kernel.name} has order {claimed:g}")


def _agree(a: QuadResult, b: QuadResult, tol: Tolerance) -> bool:
    allowed = CheckDefaults.CROSS_CHECK_FACTOR * (
        a.err_estimate + b.err_estimate
        + tol.rel * (abs(a.value) + abs(b.value)) + tol.abs)
    return abs(a.value - b.value) <= allowed


def _cstar(kernel: Kernel, p: float, Q: float, sphere: float, tol: Tolerance,
           mode: str) -> SharpConstant:
    q = p / (p - 1.0)
    first_exp = Q - 1.0 - Q / p
    second_exp = Q - 1.0 - Q / q
    primary = integrate_half_line(lambda s: kernel(1.0, s) * s ** first_exp, tol).scaled(sphere)
    cross = integrate_half_line(lambda r: kernel(r, 1.0) * r ** second_exp, tol).scaled(sphere)
    params = (("Q", Q), ("sphere_measure", sphere))

    if primary.diverged or cross.diverged:
        logger.warning(f"C*_{p:g} of {kernel.text} diverges "
                       f"(values {primary.value!r} / {cross.value!r})")
        return SharpConstant(math.inf, mode, p, NUMERIC, primary, kernel.name, params, cross)

    if not _agree(primary, cross, tol):
        raise PreconditionError(
            f"the two defining integrals of C*_p disagree for {kernel.text}: "
            f"{primary.value!r} vs {cross.value!r}")
    if not (primary.converged and cross.converged):
        logger.warning(f"C*_{p:g} of {kernel.text}: quadrature did not reach tolerance "
                       f"(err {primary.err_estimate:.3g})")
    logger.info(f"C*_{p:g}({kernel.name}) = {primary.value:.15g} ({mode} mode)")
    return SharpConstant(primary.value, mode, p, NUMERIC, primary, kernel.name, params, cross)


def cstar_classical(kernel: Kernel, p: float, tol: Tolerance | None = None) -> SharpConstant:
    """
    C*_p = int_0^inf k(1, s) s^(-1/p) ds for a kernel of order -1.

    Cross-checked against int_0^inf k(r, 1) r^(-1/q) dr.

    Raises:
        PreconditionError: kernel order is not -1, or the two integrals disagree
    """
    p = _validate_p(p)
    _require_order(kernel, -1.0, CLASSICAL)
    return _cstar(kernel, p, 1.0, 1.0, tol or Tolerance(), CLASSICAL)


def cstar_group(kernel: Kernel, p: float, group: HomogeneousGroup,
                tol: Tolerance | None = None) -> SharpConstant:
    """
    C*_p = |S| int_0^inf k(1, s) s^(Q-1-Q/p) ds for a kernel of order -Q.

    Cross-checked against |S| int_0^inf k(r, 1) r^(Q-1-Q/q) dr.
    """
    p = _validate_p(p)
    _require_order(kernel, -group.Q, GROUP)
    return _cstar(kernel, p, group.Q, group.sphere_measure, tol or Tolerance(), GROUP)


def is_half_line(group: HomogeneousGroup) -> bool:
    return group.Q == 1 and group.sphere_measure_override == 1


def sharp_constant(kernel: Kernel, p: float, group: HomogeneousGroup,
                   tol: Tolerance | None = None) -> SharpConstant:
    """Classical C*_p on the half-line group, group C*_p otherwise"""
    if is_half_line(group):
        return cstar_classical(kernel, p, tol)
    return cstar_group(kernel, p, group, tol)


# ============================================================================
# Closed forms
# ============================================================================

def _sin_ratio(p: float) -> float:
    return math.pi / math.sin(math.pi / p)


def _hardy_hilbert(p: float) -> float:
    return _sin_ratio(_validate_p(p))


def _theorem_c(lam: float, m: float) -> float:
    if not lam > 0:
        raise InputError(f"lambda must be positive, got {lam}")
    return _sin_ratio(_validate_p(m)) / lam


def _group_hilbert(Q: float, p: float) -> float:
    if not Q > 0:
        raise InputError(f"Q must be positive, got {Q}")
    return Q * _sin_ratio(_validate_p(p))


def _rn_hilbert(n: float, p: float) -> float:
    if n < 1 or n != int(n):
        raise InputError(f"n must be a positive integer, got {n}")
    return n * _sin_ratio(_validate_p(p)) * math.pi ** (n / 2.0) / gamma_fn(n / 2.0 + 1.0)


def _prop35(Q: float, lam: float, m: float) -> float:
    if not Q > 0:
        raise InputError(f"Q must be positive, got {Q}")
    return Q * _theorem_c(lam, m)


def _hardy_averaging(p: float) -> float:
    p = _validate_p(p)
    return p / (p - 1.0)


def _max_kernel(p: float) -> float:
    p = _validate_p(p)
    return p + p / (p - 1.0)


def _group_power_hilbert(Q: float, p: float, sphere: float) -> float:
    # k = 1/(r^Q + s^Q): substitute u = s^Q
    if not (Q > 0 and sphere > 0):
        raise InputError("Q and sphere must be positive")
    return sphere / Q * _sin_ratio(_validate_p(p))


def _group_weighted_hilbert(Q: float, p: float, p_kernel: float, c: float,
                            sphere: float) -> float:
    # |S| c int s^e/(1+s) ds with e = (1-Q)/p_kernel + Q - 1 - Q/p
    _validate_p(p_kernel)
    p = _validate_p(p)
    e = (1.0 - Q) / p_kernel + Q - 1.0 - Q / p
    if not -1.0 < e < 0.0:
        return math.inf
    return sphere * c * math.pi / math.sin(math.pi * (1.0 + e))


@dataclass(frozen=True)
class ClosedForm:
    name: str
    params: tuple[str, ...]
    mode: str
    fn: Callable[..., float]


CLOSED_FORMS: dict[str, ClosedForm] = {
    "hardy_hilbert": ClosedForm("hardy_hilbert", ("p",), CLASSICAL, _hardy_hilbert),
    "theorem_c": ClosedForm("theorem_c", ("lam", "m"), CLASSICAL, _theorem_c),
    "group_hilbert": ClosedForm("group_hilbert", ("Q", "p"), GROUP, _group_hilbert),
    "rn_hilbert": ClosedForm("rn_hilbert", ("n", "p"), GROUP, _rn_hilbert),
    "prop35": ClosedForm("prop35", ("Q", "lam", "m"), GROUP, _prop35),
    "hardy_averaging": ClosedForm("hardy_averaging", ("p",), CLASSICAL, _hardy_averaging),
    "max_kernel": ClosedForm("max_kernel", ("p",), CLASSICAL, _max_kernel),
    "group_power_hilbert": ClosedForm(
        "group_power_hilbert", ("Q", "p", "sphere"), GROUP, _group_power_hilbert),
    "group_weighted_hilbert": ClosedForm(
        "group_weighted_hilbert", ("Q", "p", "p_kernel", "c", "sphere"), GROUP,
        _group_weighted_hilbert),
}


def closed_form(case: str, **params: float) -> SharpConstant:
    """
    Closed-form constant from the catalog.

    Raises:
        InputError: unknown case, missing or invalid parameters
    """
    entry = CLOSED_FORMS.get(case)
    if entry is None:
        raise InputError(f"unknown closed form '{case}'. Known: {', '.join(CLOSED_FORMS)}")
    if set(params) != set(entry.params):
        raise InputError(f"{case} takes parameters {entry.params}, got {tuple(params)}")
    values = {k: float(v) for k, v in params.items()}
    value = entry.fn(**values)
    return SharpConstant(value, entry.mode, values.get("p"), CLOSED_FORM,
                         case=case, params=tuple(sorted(values.items())))


def closed_form_for(kernel: Kernel, p: float, group: HomogeneousGroup) -> SharpConstant | None:
    """
    The closed form of C*_p(kernel) in the mode sharp_constant() would use,
    when one is known for this catalog kernel.
    """
    params = dict(kernel.params)
    Q, sphere = group.Q, group.sphere_measure
    half_line = is_half_line(group)

    classical: SharpConstant | None = None
    if kernel.name == "hilbert":
        classical = closed_form("hardy_hilbert", p=p)
    elif kernel.name == "hilbert_lambda" and params["lam"] == 1:
        classical = closed_form("hardy_hilbert", p=p)
    elif kernel.name == "weighted_hilbert" and params["p"] == p:
        k_exp = params["k_exp"]
        classical = closed_form("theorem_c", lam=params["lam"], m=k_exp / (k_exp - 1.0))
    elif kernel.name == "max_kernel":
        classical = closed_form("max_kernel", p=p)
    elif kernel.name == "hardy_averaging":
        classical = closed_form("hardy_averaging", p=p)

    if classical is not None:
        if half_line:
            return classical
        if Q == 1:
            # one-dimensional group: the constant picks up the factor |S|
            return SharpConstant(classical.value * sphere, GROUP, p, CLOSED_FORM,
                                 case=classical.case,
                                 params=classical.params + (("sphere", sphere),))
        return None

    if kernel.name == "hilbert_lambda" and params["lam"] == Q:
        return closed_form("group_power_hilbert", Q=Q, p=p, sphere=sphere)
    if kernel.name == "group_weighted_hilbert" and params["Q"] == Q:
        return closed_form("group_weighted_hilbert", Q=Q, p=p, p_kernel=params["p"],
                           c=params["c"], sphere=sphere)
    return None
