"""Extrapolate fitted laws to a target horizon and recommend a learning rate.

The recipe is three separable steps: fit the drift of the best-performing
batch size over budget, extrapolate the critical laws to the target budget,
then correct the critical learning rate for the gap between the planned batch
size and the critical one via the square-root case equation. The planned and
critical batch sizes are kept distinct throughout; measurements show they
need not coincide, so neither is ever substituted for the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .powerlaw import PowerLawParams, eval_powerlaw, fit_powerlaw

__all__ = [
    "Recommendation",
    "RegimeCall",
    "fit_bstar_drift",
    "recommend",
    "classify_regime",
    "snap_pow2",
]

SUB_CRITICAL = "sub_critical"
CRITICAL = "critical"
SUPER_CRITICAL = "super_critical"

_RULES = {
    SUB_CRITICAL: "eta_star grows as sqrt(B) below B_crit",
    CRITICAL: "eta_star tracks eta_crit near B_crit",
    SUPER_CRITICAL: "eta_star falls as 1/sqrt(B) above B_crit (the surge side)",
}


def fit_bstar_drift(
    history: Sequence[tuple[float, float]],
    fit_offset: bool = False,
    two_point: bool = False,
) -> PowerLawParams:
    """Fit the drift of the best batch size over budget as a power law.

    The default is a pure power law (zero offset) fit log-linearly, since only
    a proportionality is being modeled; ``fit_offset`` switches to the full
    three-parameter law (needs at least 4 points). The zero-offset mode needs
    at least 3 points unless ``two_point`` explicitly allows the exact
    two-point slope.
    """
    if fit_offset:
        pts = [(t, b, 0.0) for t, b in history]
        return fit_powerlaw(pts, target="b_star")
    n = len(history)
    if n < 2 or (n == 2 and not two_point):
        raise ValueError(
            "need at least 3 points (or two_point=True for the exact slope)"
        )
    T = np.asarray([t for t, _ in history], dtype=float)
    Bs = np.asarray([b for _, b in history], dtype=float)
    if np.any(T <= 0) or np.any(Bs <= 0):
        raise ValueError("budgets and batch sizes must be positive")
    x = np.log(T)
    y = np.log(Bs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = n - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        xc = x - x.mean()
        sxx = float(xc @ xc)
        sigma_alpha = math.sqrt(s2 / sxx)
        sigma_loga = math.sqrt(s2 * (1.0 / n + x.mean() ** 2 / sxx))
    else:
        sigma_alpha = 0.0
        sigma_loga = 0.0
    a = math.exp(intercept)
    return PowerLawParams(
        a=a,
        alpha=float(slope),
        b=0.0,
        sigma_a=a * sigma_loga,
        sigma_alpha=sigma_alpha,
        sigma_b=0.0,
        target="b_star",
        residual_norm=float(math.sqrt(resid @ resid)),
        converged=True,
    )


@dataclass(frozen=True)
class Recommendation:
    """Extrapolated operating point for a target token budget."""

    t_target: int
    b_star_target: float
    b_crit_target: float
    eta_crit_target: float
    eta_star_target: float
    regime: str
    provenance: dict

    def to_json(self) -> dict:
        return {
            "t_target": self.t_target,
            "b_star_target": self.b_star_target,
            "b_crit_target": self.b_crit_target,
            "eta_crit_target": self.eta_crit_target,
            "eta_star_target": self.eta_star_target,
            "regime": self.regime,
            "provenance": self.provenance,
        }

    def summary(self) -> str:
        lines = [
            f"target budget        : {self.t_target}",
            f"planned batch (B*)   : {self.b_star_target:.6g}",
            f"critical batch       : {self.b_crit_target:.6g}",
            f"critical lr          : {self.eta_crit_target:.6g}",
            f"recommended lr       : {self.eta_star_target:.6g}",
            f"regime               : {self.regime} ({_RULES[self.regime]})",
        ]
        return "\n".join(lines)


def recommend(
    b_star_target: float,
    b_crit_law: PowerLawParams,
    eta_crit_law: PowerLawParams,
    t_target: int,
) -> Recommendation:
    """Correct the critical learning rate for the planned batch size.

    eta_star = eta_crit * sqrt(B*/B_crit) below the critical batch and
    eta_crit * sqrt(B_crit/B*) above it; the branches agree at B* = B_crit,
    and neither exceeds eta_crit.
    """
    if t_target <= 0:
        raise ValueError("t_target must be positive")
    if b_star_target <= 0:
        raise ValueError("b_star_target must be positive")
    b_crit = eval_powerlaw(b_crit_law, t_target)
    if b_crit <= 0:
        raise ValueError(
            f"critical-batch law gives non-positive value {b_crit:g} at T={t_target}"
        )
    eta_crit = eval_powerlaw(eta_crit_law, t_target)
    if eta_crit <= 0:
        raise ValueError(
            f"critical-lr law gives non-positive value {eta_crit:g} at T={t_target}"
        )
    if b_star_target <= b_crit:
        eta_star = eta_crit * math.sqrt(b_star_target / b_crit)
    else:
        eta_star = eta_crit * math.sqrt(b_crit / b_star_target)
    if b_star_target < b_crit:
        regime = SUB_CRITICAL
    elif b_star_target > b_crit:
        regime = SUPER_CRITICAL
    else:
        regime = CRITICAL
    return Recommendation(
        t_target=t_target,
        b_star_target=float(b_star_target),
        b_crit_target=float(b_crit),
        eta_crit_target=float(eta_crit),
        eta_star_target=float(eta_star),
        regime=regime,
        provenance={
            "b_crit_law": b_crit_law.to_json(),
            "eta_crit_law": eta_crit_law.to_json(),
        },
    )


class RegimeCall(NamedTuple):
    regime: str
    rule: str


def classify_regime(
    batch_size: float, b_crit: float, tolerance_log2: float = 1.0
) -> RegimeCall:
    """Name the scaling regime of a batch size relative to the critical one.

    Within ``tolerance_log2`` of B_crit (in log2 distance) the regime is
    critical; otherwise the sign of the gap picks the limiting rule.
    """
    if batch_size <= 0 or b_crit <= 0:
        raise ValueError("batch_size and b_crit must be positive")
    gap = math.log2(batch_size / b_crit)
    if abs(gap) <= tolerance_log2:
        regime = CRITICAL
    elif gap < 0:
        regime = SUB_CRITICAL
    else:
        regime = SUPER_CRITICAL
    return RegimeCall(regime=regime, rule=_RULES[regime])


def snap_pow2(value: float) -> float:
    """Snap a positive value to the nearest power of two (by log2 rounding)."""
    if value <= 0:
        raise ValueError("value must be positive")
    return float(2.0 ** round(math.log2(value)))
