"""Homogeneous groups as anisotropic dilation structures on R^N.

Only the dilation, quasi-norm and measure structure is modelled: Haar
measure is Lebesgue measure, and every integral the package needs is radial,
so the sphere measure enters only through its total mass |S|.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any

import numpy as np

from errors import DivergenceError, InputError
from hh_config import MCDefaults
from logger import get_logger
from quad import QuadResult, Tolerance, gamma_fn, integrate_half_line, mc_integrate

logger = get_logger("group")

Point = tuple[float, ...]


class NormKind(str, Enum):
    """Available quasi-norms"""
    MAX = "max"              # max_i |x_i|^(1/v_i)
    POWER = "power"          # (sum_i |x_i|^(2M/v_i))^(1/2M)
    EUCLIDEAN = "euclidean"  # only for unit weights


@dataclass(frozen=True)
class HomogeneousGroup:
    """Dilation weights plus a quasi-norm; Q is the sum of the weights"""
    weights: tuple[float, ...]
    norm: NormKind = NormKind.MAX
    power: int | None = None   # the even exponent 2M for NormKind.POWER
    sphere_measure_override: float | None = None
    mc_samples: int = MCDefaults.SAMPLES
    seed: int = MCDefaults.SEED

    def __post_init__(self) -> None:
        if not self.weights:
            raise InputError("a group needs at least one weight")
        if any(not (math.isfinite(w) and w > 0) for w in self.weights):
            raise InputError(f"weights must be positive, got {self.weights}")
        if self.norm is NormKind.EUCLIDEAN and any(w != 1 for w in self.weights):
            raise InputError("the euclidean norm requires all weights equal to 1")
        if self.norm is NormKind.POWER:
            if self.power is None or self.power <= 0 or self.power % 2:
                raise InputError(f"power norm needs an even positive exponent 2M, got {self.power}")
            half = self.power // 2
            for w in self.weights:
                ratio = half / w
                if abs(ratio - round(ratio)) > 1e-12:
                    raise InputError(f"power:{self.power} requires M={half} divisible by weight {w}")
        if self.sphere_measure_override is not None and not self.sphere_measure_override > 0:
            raise InputError("sphere_measure_override must be positive")
        if self.mc_samples < MCDefaults.MIN_SAMPLES:
            raise InputError(f"mc_samples must be >= {MCDefaults.MIN_SAMPLES}")

    @property
    def N(self) -> int:
        return len(self.weights)

    @property
    def Q(self) -> float:
        return math.fsum(self.weights)

    @property
    def is_isotropic(self) -> bool:
        return all(w == 1 for w in self.weights)

    @property
    def norm_label(self) -> str:
        if self.norm is NormKind.POWER:
            return f"power:{self.power}"
        return self.norm.value

    @property
    def sphere_measure(self) -> float:
        """|S| under this group's own Monte Carlo settings"""
        return sphere_measure(self).value

    def to_dict(self) -> dict[str, Any]:
        return {
            "weights": list(self.weights),
            "norm": self.norm_label,
            "sphere_measure_override": self.sphere_measure_override,
            "N": self.N,
            "Q": self.Q,
        }

    @classmethod
    def half_line(cls) -> HomogeneousGroup:
        """(0, inf) with |S| = 1, the setting of the classical one-dimensional theory"""
        return cls((1.0,), NormKind.EUCLIDEAN, sphere_measure_override=1.0)

    @classmethod
    def euclidean(cls, n: int, **kwargs: Any) -> HomogeneousGroup:
        return cls(tuple(1.0 for _ in range(n)), NormKind.EUCLIDEAN, **kwargs)

    @classmethod
    def from_config(cls, spec: dict[str, Any], mc_samples: int = MCDefaults.SAMPLES,
                    seed: int = MCDefaults.SEED) -> HomogeneousGroup:
        """Build from {"weights": [...], "norm": "max" | "power:<2M>" | "euclidean"}"""
        weights = tuple(float(w) for w in spec.get("weights", ()))
        kind, power = parse_norm(spec.get("norm", "max"))
        return cls(weights, kind, power, spec.get("sphere_measure_override"),
                   mc_samples, seed)


def parse_norm(text: str) -> tuple[NormKind, int | None]:
    """Parse "max", "euclidean" or "power:<2M>" """
    text = str(text).strip().lower()
    if text.startswith("power:"):
        try:
            return NormKind.POWER, int(text.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad power norm '{text}', expected power:<even integer>") from None
    try:
        return NormKind(text), None
    except ValueError:
        raise InputError(f"unknown norm '{text}' (max, power:<2M>, euclidean)") from None


def _check_dim(group: HomogeneousGroup, x: Sequence[float]) -> None:
    if len(x) != group.N:
        raise InputError(f"point has dimension {len(x)}, group has N={group.N}")


def dilate(group: HomogeneousGroup, lam: float, x: Sequence[float]) -> Point:
    """D_lam(x) = (lam^v_1 x_1, ..., lam^v_N x_N)"""
    if not lam > 0:
        raise InputError(f"dilation factor must be positive, got {lam}")
    _check_dim(group, x)
    return tuple(lam ** v * xi for v, xi in zip(group.weights, x))


def quasi_norm(group: HomogeneousGroup, x: Sequence[float]) -> float:
    _check_dim(group, x)
    return float(quasi_norm_array(group, np.asarray(x, dtype=float)[None, :])[0])


def quasi_norm_array(group: HomogeneousGroup, points: np.ndarray) -> np.ndarray:
    """Quasi-norm of each row of an (n, N) array"""
    pts = np.abs(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != group.N:
        raise InputError(f"expected an (n, {group.N}) array, got shape {pts.shape}")
    w = np.asarray(group.weights)
    if group.norm is NormKind.EUCLIDEAN:
        return np.sqrt((pts * pts).sum(axis=1))
    if group.norm is NormKind.MAX:
        return (pts ** (1.0 / w)).max(axis=1)
    two_m = float(group.power)
    return (pts ** (two_m / w)).sum(axis=1) ** (1.0 / two_m)


def _euclidean_sphere(n: int) -> float:
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


@lru_cache(maxsize=64)
def _sphere_measure_cached(group: HomogeneousGroup, mc_samples: int, seed: int,
                           method: str) -> QuadResult:
    if group.sphere_measure_override is not None:
        return QuadResult(float(group.sphere_measure_override), 0.0, 0, True)

    if method == "closed_form" or (method == "auto" and group.norm is NormKind.EUCLIDEAN):
        if group.norm is not NormKind.EUCLIDEAN:
            raise InputError("closed-form sphere measure exists only for the euclidean norm")
        return QuadResult(_euclidean_sphere(group.N), 0.0, 0, True)

    # Unit ball lies in [-1, 1]^N: each |x_i|^(1/v_i) <= |x| for max and power norms
    box = [(-1.0, 1.0)] * group.N
    ball = mc_integrate(
        lambda pts: (quasi_norm_array(group, pts) <= 1.0).astype(float),
        box, mc_samples, seed, chunk_size=MCDefaults.CHUNK_SIZE)
    box_volume = 2.0 ** group.N
    hit_rate = ball.value / box_volume
    std_err = box_volume * math.sqrt(max(hit_rate * (1.0 - hit_rate), 0.0) / mc_samples)
    logger.info(f"sphere measure for {group.weights} by Monte Carlo: "
                f"|B(0,1)| = {ball.value:.6g} +- {std_err:.2g}")
    return QuadResult(group.Q * ball.value, group.Q * std_err, mc_samples, True)


def sphere_measure(group: HomogeneousGroup, mc_samples: int | None = None,
                   seed: int | None = None, method: str = "auto") -> QuadResult:
    """
    Total mass |S| = Q |B(0,1)| of the unit quasi-sphere.

    Args:
        group: The group
        mc_samples: Monte Carlo sample count (default: the group's own)
        seed: Monte Carlo seed (default: the group's own)
        method: "auto" (closed form for euclidean, else MC), "mc" or "closed_form"

    Returns:
        QuadResult with the binomial standard error scaled by Q
    """
    if method not in ("auto", "mc", "closed_form"):
        raise InputError(f"unknown sphere measure method '{method}'")
    samples = group.mc_samples if mc_samples is None else int(mc_samples)
    if samples < MCDefaults.MIN_SAMPLES:
        raise InputError(f"mc_samples must be >= {MCDefaults.MIN_SAMPLES}, got {samples}")
    return _sphere_measure_cached(group, samples, group.seed if seed is None else int(seed), method)


def sphere_measure_method(group: HomogeneousGroup) -> str:
    if group.sphere_measure_override is not None:
        return "override"
    return "closed_form" if group.norm is NormKind.EUCLIDEAN else "monte_carlo"


def ball_volume(group: HomogeneousGroup, r: float) -> float:
    """|B(0, r)| = (|S| / Q) r^Q"""
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")
    return group.sphere_measure / group.Q * r ** group.Q


def dilation_scaling_residual(group: HomogeneousGroup, radii: Sequence[float],
                              lam: float = 2.0) -> float:
    """Worst relative deviation from |B(0, lam r)| = lam^Q |B(0, r)|"""
    worst = 0.0
    for r in radii:
        expected = lam ** group.Q * ball_volume(group, r)
        worst = max(worst, abs(ball_volume(group, lam * r) - expected) / expected)
    return worst


def integrate_radial(group: HomogeneousGroup, phi: Callable[[float], float],
                     tol: Tolerance | None = None,
                     points: Sequence[float] | None = None) -> QuadResult:
    """
    Integral over the group of f(x) = phi(|x|), i.e. |S| * int phi(r) r^(Q-1) dr.

    Breakpoints default to phi.breakpoints when phi provides them.

    Raises:
        DivergenceError: the radial integral does not converge
    """
    q_minus_1 = group.Q - 1.0
    pts = tuple(points) if points is not None else tuple(getattr(phi, "breakpoints", ()))
    res = integrate_half_line(lambda r: phi(r) * r ** q_minus_1, tol, pts)
    res = res.scaled(group.sphere_measure)
    if res.diverged:
        raise DivergenceError(
            f"radial integral diverged (partial value {res.value!r})", partial=res)
    return res
