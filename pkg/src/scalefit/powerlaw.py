"""Shifted power-law fits p(T) = a*T^alpha + b and exponent consolidation.

The model is nonlinear only in alpha: for a fixed exponent, (a, b) solve a
weighted linear system. Fits therefore scan a profiled-alpha objective for a
sound starting point and polish with damped Gauss-Newton. Exponents fitted
under the three sigma variants are consolidated into a single value whose
uncertainty combines the cross-variant scatter with the mean per-variant
sigma in quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .leastsq import levenberg_marquardt, scaled_covariance
from .surge import EPS_SIGMA, FitVariant, effective_sigmas

__all__ = [
    "PowerLawParams",
    "ConsolidatedExponent",
    "power_law",
    "eval_powerlaw",
    "fit_powerlaw",
    "refit_fixed_exponent",
    "consolidate_exponent",
    "combine_with_scatter",
]

FIT_TARGETS = ("eta_crit", "b_crit", "b_star")


@dataclass(frozen=True)
class PowerLawParams:
    """Parameters of p(T) = a*T^alpha + b with per-parameter uncertainties."""

    a: float
    alpha: float
    b: float
    sigma_a: float = 0.0
    sigma_alpha: float = 0.0
    sigma_b: float = 0.0
    fixed_alpha: bool = False
    target: str = "custom"
    variant: str | None = None
    residual_norm: float = 0.0
    converged: bool = True

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "variant": self.variant,
            "a": self.a,
            "alpha": self.alpha,
            "b": self.b,
            "sigma_a": self.sigma_a,
            "sigma_alpha": self.sigma_alpha,
            "sigma_b": self.sigma_b,
            "fixed_alpha": self.fixed_alpha,
        }


def power_law(a: float, alpha: float, b: float, target: str = "custom") -> PowerLawParams:
    """Bare law with no uncertainties, for ground truths and user overrides."""
    return PowerLawParams(a=a, alpha=alpha, b=b, target=target)


def eval_powerlaw(params: PowerLawParams, T) -> float | np.ndarray:
    """Evaluate a*T^alpha + b at budget T (scalar or array), T > 0."""
    t = np.asarray(T, dtype=float)
    if np.any(t <= 0):
        raise ValueError("T must be positive")
    out = params.a * t**params.alpha + params.b
    if np.isscalar(T) or np.ndim(T) == 0:
        return float(out)
    return out


def _default_sigmas(s: np.ndarray) -> np.ndarray:
    """Sigma policy when no variant is requested: floor zeros, or go uniform."""
    if np.all(s == 0.0):
        return np.ones_like(s)
    out = s.copy()
    out[out == 0.0] = EPS_SIGMA
    return out


def _prepare(points, variant):
    T = np.asarray([p[0] for p in points], dtype=float)
    y = np.asarray([p[1] for p in points], dtype=float)
    s = np.asarray([p[2] for p in points], dtype=float)
    if np.any(T <= 0):
        raise ValueError("budgets must be positive")
    if len(np.unique(T)) != len(T):
        raise ValueError("budgets must be distinct")
    if np.any(s < 0):
        raise ValueError("sigmas must be nonnegative")
    sig = effective_sigmas(s, variant) if variant is not None else _default_sigmas(s)
    return T, y, 1.0 / sig


def _linear_ab(T: np.ndarray, y: np.ndarray, w: np.ndarray, alpha: float):
    """Weighted least-squares (a, b) for fixed alpha, with chi-square."""
    X = np.column_stack([T**alpha, np.ones_like(T)])
    Xw = X * w[:, None]
    yw = y * w
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    r = yw - Xw @ coef
    return float(coef[0]), float(coef[1]), float(r @ r)


def fit_powerlaw(
    points: Sequence[tuple[float, float, float]],
    target: str,
    variant: FitVariant | None = None,
) -> PowerLawParams:
    """Fit (a, alpha, b) to (T, p, sigma) points by weighted least squares.

    Needs at least 4 points with distinct T. The starting point follows the
    shape of the data: b0 = 0.9*min(p) (1.1*min(p) for decreasing targets),
    alpha0 from the slope of log(p - b0) against log T, a0 from the smallest
    budget; a profiled-alpha scan around alpha0 then replaces it with the
    best conditionally-linear candidate before the Gauss-Newton polish, with
    a kept positive in log space.

    Constant data leaves alpha unidentified; that case returns the flat law
    (a = 0, b = mean) flagged converged with infinite sigma_a and
    sigma_alpha, rather than raising.
    """
    if target not in FIT_TARGETS:
        raise ValueError(f"unknown fit target {target!r}")
    if len(points) < 4:
        raise ValueError("need at least 4 points to fit a three-parameter law")
    T, y, w = _prepare(points, variant)

    if float(np.ptp(y)) <= 1e-12 * float(np.max(np.abs(y))):
        mean = float(np.average(y, weights=w**2))
        dev = y - mean
        chi2 = float((dev * w) @ (dev * w))
        dof = len(y) - 2
        sigma_b = math.sqrt(max(chi2 / dof, 0.0) / float(np.sum(w**2))) if dof > 0 else 0.0
        return PowerLawParams(
            a=0.0,
            alpha=0.0,
            b=mean,
            sigma_a=math.inf,
            sigma_alpha=math.inf,
            sigma_b=sigma_b,
            target=target,
            variant=variant.tag if variant else None,
            residual_norm=math.sqrt(chi2),
            converged=True,
        )

    decreasing = y[np.argmax(T)] < y[np.argmin(T)]
    b0 = (1.1 if decreasing else 0.9) * float(np.min(y))
    alpha0 = _slope_estimate(T, y, b0)
    if alpha0 is None:
        b0 = 0.5 * float(np.min(y))
        alpha0 = _slope_estimate(T, y, b0) or (-1.0 if decreasing else 1.0)

    # Profile the conditionally-linear structure: best (a, b) per candidate
    # alpha, preferring candidates that keep a positive.
    candidates = np.concatenate(
        [np.linspace(alpha0 - 2.0, alpha0 + 2.0, 81), [alpha0]]
    )
    best = None
    for alpha in candidates:
        if abs(alpha) > 8.0:
            continue
        a_lin, b_lin, chi2 = _linear_ab(T, y, w, float(alpha))
        if a_lin <= 0:
            continue
        if best is None or chi2 < best[3]:
            best = (a_lin, b_lin, float(alpha), chi2)
    if best is None:
        a_start = abs(y[np.argmin(T)] - b0) or 1.0
        best = (a_start, b0, float(alpha0), math.inf)
    a0, b_start, alpha_start, _ = best

    def model(x: np.ndarray) -> np.ndarray:
        return math.exp(x[0]) * T ** x[1] + x[2]

    def residual(x: np.ndarray) -> np.ndarray:
        return (y - model(x)) * w

    def jacobian(x: np.ndarray) -> np.ndarray:
        core = math.exp(x[0]) * T ** x[1]
        return np.column_stack(
            [-core * w, -core * np.log(T) * w, -np.ones_like(T) * w]
        )

    res = levenberg_marquardt(
        residual, jacobian, np.array([math.log(a0), alpha_start, b_start])
    )
    a = math.exp(res.x[0])
    return PowerLawParams(
        a=a,
        alpha=float(res.x[1]),
        b=float(res.x[2]),
        sigma_a=float(a * res.sigma[0]),
        sigma_alpha=float(res.sigma[1]),
        sigma_b=float(res.sigma[2]),
        target=target,
        variant=variant.tag if variant else None,
        residual_norm=math.sqrt(res.chi2),
        converged=res.converged,
    )


def _slope_estimate(T: np.ndarray, y: np.ndarray, b0: float) -> float | None:
    keep = y - b0 > 0
    if np.count_nonzero(keep) < 2:
        return None
    slope = np.polyfit(np.log(T[keep]), np.log(y[keep] - b0), 1)[0]
    return float(slope)


def refit_fixed_exponent(
    points: Sequence[tuple[float, float, float]],
    alpha_fixed: float,
    target: str = "custom",
    variant: FitVariant | None = None,
) -> PowerLawParams:
    """Two-parameter weighted linear fit of (a, b) with the exponent pinned.

    Needs at least 3 points. Uncertainties come from the linear-system
    covariance, rescaled by reduced chi-square like the free fit.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 points to refit (a, b)")
    T, y, w = _prepare(points, variant)
    a, b, chi2 = _linear_ab(T, y, w, alpha_fixed)
    X = np.column_stack([T**alpha_fixed, np.ones_like(T)])
    r = (y - X @ np.array([a, b])) * w
    sigma, _ = scaled_covariance(X * w[:, None], r)
    return PowerLawParams(
        a=a,
        alpha=alpha_fixed,
        b=b,
        sigma_a=float(sigma[0]),
        sigma_alpha=0.0,
        sigma_b=float(sigma[1]),
        fixed_alpha=True,
        target=target,
        variant=variant.tag if variant else None,
        residual_norm=math.sqrt(chi2),
        converged=True,
    )


@dataclass(frozen=True)
class ConsolidatedExponent:
    """A single exponent summarizing the three sigma-variant fits."""

    alpha_hat: float
    sigma: float
    contributing: tuple[tuple[str, float, float], ...]
    target: str

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "alpha_hat": self.alpha_hat,
            "sigma": self.sigma,
            "contributing": [
                {"variant": v, "alpha": a, "sigma": s}
                for v, a, s in self.contributing
            ],
        }


def combine_with_scatter(
    values: Sequence[float], sigmas: Sequence[float]
) -> tuple[float, float]:
    """Mean of values; sigma adds their scatter and mean sigma in quadrature.

    sigma^2 = population variance of the values + (mean of the sigmas)^2.
    Identical inputs with equal sigma s reproduce (value, s) exactly.
    """
    vals = np.asarray(values, dtype=float)
    sigs = np.asarray(sigmas, dtype=float)
    mean = float(vals.mean())
    scatter = float(np.mean((vals - mean) ** 2))
    return mean, math.sqrt(scatter + float(sigs.mean()) ** 2)


def consolidate_exponent(
    three: Sequence[PowerLawParams],
) -> ConsolidatedExponent:
    """Average the exponents of the three per-variant fits for one target."""
    if len(three) != 3:
        raise ValueError("expected exactly three per-variant fits")
    targets = {p.target for p in three}
    if len(targets) != 1:
        raise ValueError(f"mismatched fit targets {sorted(targets)}")
    alphas = [p.alpha for p in three]
    sigmas = [p.sigma_alpha for p in three]
    alpha_hat, sigma = combine_with_scatter(alphas, sigmas)
    return ConsolidatedExponent(
        alpha_hat=alpha_hat,
        sigma=sigma,
        contributing=tuple(
            (p.variant or "unspecified", p.alpha, p.sigma_alpha) for p in three
        ),
        target=three[0].target,
    )
