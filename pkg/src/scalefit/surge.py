"""The optimal-learning-rate bell curve over batch size, and fits to it.

The working form is

    eta_star(B) = eta_crit / (sqrt(B/B_crit) + sqrt(B_crit/B))

which peaks at B = B_crit with value eta_crit/2 and is symmetric under
B -> B_crit^2/B. Fits are weighted nonlinear least squares with three
sigma-handling variants whose spread downstream consumers treat as a
systematic uncertainty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .leastsq import levenberg_marquardt
from .run_store import OptimumTable

__all__ = [
    "FitVariant",
    "NO_ERROR",
    "EPS_FLOOR",
    "MEAN_SIGMA",
    "VARIANTS",
    "variant_by_tag",
    "effective_sigmas",
    "eval_surge",
    "SurgeParams",
    "fit_surge",
    "BudgetFits",
    "fit_all_budgets",
]

EPS_SIGMA = 1e-15


@dataclass(frozen=True)
class FitVariant:
    """One policy for turning reported sigmas into fit weights."""

    tag: str
    sigma_policy: str


NO_ERROR = FitVariant("no_error", "ignore sigmas, weight every point equally")
EPS_FLOOR = FitVariant("eps_floor", f"replace zero sigmas by {EPS_SIGMA:g}")
MEAN_SIGMA = FitVariant(
    "mean_sigma", "replace zero sigmas by the mean of the nonzero sigmas"
)
VARIANTS = (NO_ERROR, EPS_FLOOR, MEAN_SIGMA)

_TAG_ALIASES = {
    "no_error": NO_ERROR,
    "no-error": NO_ERROR,
    "eps_floor": EPS_FLOOR,
    "eps": EPS_FLOOR,
    "mean_sigma": MEAN_SIGMA,
    "mean-sigma": MEAN_SIGMA,
}


def variant_by_tag(tag: str) -> FitVariant:
    try:
        return _TAG_ALIASES[tag]
    except KeyError:
        raise ValueError(f"unknown fit variant {tag!r}") from None


def effective_sigmas(sigmas: Sequence[float], variant: FitVariant) -> np.ndarray:
    """Apply a variant's sigma policy, returning strictly positive sigmas."""
    s = np.asarray(sigmas, dtype=float)
    if np.any(s < 0):
        raise ValueError("sigmas must be nonnegative")
    if variant.tag == "no_error":
        return np.ones_like(s)
    if variant.tag == "eps_floor":
        out = s.copy()
        out[out == 0.0] = EPS_SIGMA
        return out
    if variant.tag == "mean_sigma":
        out = s.copy()
        nonzero = out[out > 0.0]
        if nonzero.size == 0:
            # Nothing to attribute from: fall back to equal weights.
            return np.ones_like(s)
        out[out == 0.0] = float(nonzero.mean())
        return out
    raise ValueError(f"unknown fit variant {variant.tag!r}")


def eval_surge(eta_crit: float, b_crit: float, batch_size) -> float | np.ndarray:
    """Optimal learning rate at batch size B for given (eta_crit, B_crit).

    Accepts a scalar or array batch size. All arguments must be positive.
    """
    B = np.asarray(batch_size, dtype=float)
    if not (eta_crit > 0 and b_crit > 0) or np.any(B <= 0):
        raise ValueError("eta_crit, b_crit, and batch_size must be positive")
    ratio = np.sqrt(B / b_crit)
    out = eta_crit / (ratio + 1.0 / ratio)
    if np.isscalar(batch_size) or np.ndim(batch_size) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SurgeParams:
    """Fitted bell-curve parameters for one token budget and one variant."""

    eta_crit: float
    b_crit: float
    sigma_eta_crit: float
    sigma_b_crit: float
    variant: str
    tokens: int | None
    residual_norm: float
    n_points: int
    converged: bool
    iterations: int

    def to_json(self) -> dict:
        return {
            "tokens": self.tokens,
            "variant": self.variant,
            "eta_crit": self.eta_crit,
            "b_crit": self.b_crit,
            "sigma_eta_crit": self.sigma_eta_crit,
            "sigma_b_crit": self.sigma_b_crit,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
        }


def fit_surge(
    points: Sequence[tuple[float, float, float]],
    variant: FitVariant = NO_ERROR,
    tokens: int | None = None,
    log_residuals: bool = False,
) -> SurgeParams:
    """Fit (eta_crit, B_crit) to observed (B, eta_star, sigma) triples.

    Residuals are formed in linear eta space by default, weighted by the
    variant's effective sigmas; ``log_residuals`` switches to log eta with
    sigmas mapped by sigma/eta. Both parameters are kept positive through an
    internal log parameterization. Initialization reads the curve's most
    identifiable feature, the peak: B_crit starts at the argmax of eta_star
    and eta_crit at twice the peak value.

    Requires at least 3 points with distinct B. A fit that fails to converge
    within the iteration cap is returned flagged, not raised.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 points to fit the surge curve")
    B = np.asarray([p[0] for p in points], dtype=float)
    y = np.asarray([p[1] for p in points], dtype=float)
    s = np.asarray([p[2] for p in points], dtype=float)
    if len(np.unique(B)) < 3:
        raise ValueError("need at least 3 distinct batch sizes")
    if np.any(B <= 0) or np.any(y <= 0):
        raise ValueError("batch sizes and eta_star values must be positive")

    sig = effective_sigmas(s, variant)
    if log_residuals:
        obs = np.log(y)
        sig = sig / y
    else:
        obs = y
    w = 1.0 / sig

    i_peak = int(np.argmax(y))
    x0 = np.array([math.log(2.0 * y[i_peak]), math.log(B[i_peak])])

    def model(x: np.ndarray) -> np.ndarray:
        eta_c, b_c = math.exp(x[0]), math.exp(x[1])
        return eta_c / (np.sqrt(B / b_c) + np.sqrt(b_c / B))

    def residual(x: np.ndarray) -> np.ndarray:
        f = model(x)
        pred = np.log(f) if log_residuals else f
        return (obs - pred) * w

    def jacobian(x: np.ndarray) -> np.ndarray:
        b_c = math.exp(x[1])
        u = np.sqrt(B / b_c)
        g = u + 1.0 / u
        f = math.exp(x[0]) / g
        # df/dlog(eta_c) = f; df/dlog(b_c) = f * (u - 1/u) / (2g)
        dfe = f
        dfb = f * (u - 1.0 / u) / (2.0 * g)
        if log_residuals:
            dfe, dfb = dfe / f, dfb / f
        return np.column_stack([-dfe * w, -dfb * w])

    res = levenberg_marquardt(residual, jacobian, x0)
    eta_c, b_c = math.exp(res.x[0]), math.exp(res.x[1])
    # Exact delta-method map from log-space sigmas to the original scale.
    sigma_eta = eta_c * res.sigma[0]
    sigma_b = b_c * res.sigma[1]
    return SurgeParams(
        eta_crit=eta_c,
        b_crit=b_c,
        sigma_eta_crit=float(sigma_eta),
        sigma_b_crit=float(sigma_b),
        variant=variant.tag,
        tokens=tokens,
        residual_norm=math.sqrt(res.chi2),
        n_points=res.n_points,
        converged=res.converged,
        iterations=res.iterations,
    )


@dataclass(frozen=True)
class BudgetFits:
    """Per-budget surge fits, one per variant, plus skip diagnostics."""

    by_budget: dict[int, tuple[SurgeParams, ...]]
    diagnostics: tuple[str, ...]

    def budgets(self) -> tuple[int, ...]:
        return tuple(sorted(self.by_budget))

    def series(self, variant: FitVariant) -> list[SurgeParams]:
        """All budgets' fits for one variant, ascending in tokens."""
        out = []
        for t in self.budgets():
            for fit in self.by_budget[t]:
                if fit.variant == variant.tag:
                    out.append(fit)
        return out


def fit_all_budgets(
    table: OptimumTable,
    variants: Iterable[FitVariant] = VARIANTS,
) -> BudgetFits:
    """Fit the surge curve per token budget, once per sigma variant.

    Optimum-table entries hold log2 means and stds; they are mapped to linear
    eta_star with sigma = ln(2) * eta_star * std (delta method). Budgets with
    fewer than 3 batch sizes are skipped and noted in the diagnostics.
    """
    fits: dict[int, tuple[SurgeParams, ...]] = {}
    notes: list[str] = []
    for tokens in table.budgets():
        batches = table.batches_for(tokens)
        if len(batches) < 3:
            notes.append(
                f"budget T={tokens}: {len(batches)} batch size(s), "
                "need at least 3; skipped"
            )
            continue
        points = []
        for b in batches:
            entry = table.entries[(b, tokens)]
            eta = 2.0**entry.log2_eta_star_mean
            sigma = math.log(2.0) * eta * entry.log2_eta_star_std
            points.append((float(b), eta, sigma))
        fits[tokens] = tuple(
            fit_surge(points, variant=v, tokens=tokens) for v in variants
        )
    return BudgetFits(by_budget=fits, diagnostics=tuple(notes))
