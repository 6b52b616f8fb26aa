"""Scalar evaluators for gradient-noise and critical-batch-size formulas.

Matrix quantities (true gradient, Hessian, gradient covariance) are never
materialized here; callers supply the scalar aggregates these definitions
consume. Measuring those aggregates needs a training harness, which is out
of scope.
"""

from __future__ import annotations

import math

__all__ = [
    "b_crit_ratio",
    "b_noise_curv",
    "b_simple_curv",
    "b_crit_from_loss",
    "b_noise_sde",
    "b_noise_norm",
    "eta_star_li",
]


def b_crit_ratio(e_min: float, s_min: float) -> float:
    """Critical batch size as E_min / S_min (example versus step efficiency)."""
    if e_min <= 0 or s_min <= 0:
        raise ValueError("E_min and S_min must be positive")
    return e_min / s_min


def b_noise_curv(tr_h_sigma: float, gt_h_g: float) -> float:
    """Curvature-aware noise scale tr(H Sigma) / (G' H G)."""
    if gt_h_g == 0:
        raise ValueError("G' H G must be nonzero")
    return tr_h_sigma / gt_h_g


def b_simple_curv(tr_sigma: float, g_sq: float) -> float:
    """Simplified noise scale tr(Sigma) / |G|^2 (Hessian taken as identity)."""
    if g_sq == 0:
        raise ValueError("|G|^2 must be nonzero")
    return tr_sigma / g_sq


def b_crit_from_loss(b0: float, alpha_b: float, loss: float) -> float:
    """Loss-only critical batch size B0 / L^(1/alpha_B)."""
    if b0 <= 0 or loss <= 0:
        raise ValueError("B0 and loss must be positive")
    if alpha_b == 0:
        raise ValueError("alpha_b must be nonzero")
    return b0 / loss ** (1.0 / alpha_b)


def b_noise_sde(eta: float, t_examples: float, batch_size: float) -> float:
    """Stochastic-integration noise scale eta * (T/B - 1); zero at B = T."""
    if eta <= 0 or t_examples <= 0 or batch_size <= 0:
        raise ValueError("eta, T, and B must be positive")
    if batch_size > t_examples:
        raise ValueError("batch_size cannot exceed the training set size")
    return eta * (t_examples / batch_size - 1.0)


def b_noise_norm(
    eta: float, t_examples: float, batch_size: float, w_norm_sq: float
) -> float:
    """b_noise_sde normalized by |w|^2, giving units of 1/loss."""
    if w_norm_sq <= 0:
        raise ValueError("|w|^2 must be positive")
    return b_noise_sde(eta, t_examples, batch_size) / w_norm_sq


def eta_star_li(eta_crit: float, b_peak: float, batch_size: float) -> float:
    """Optimal-lr bell curve in the convention whose peak value is eta_crit.

    eta_star = eta_crit / (0.5 * (sqrt(B_peak/B) + sqrt(B/B_peak))). This is
    exactly twice the working form used by the surge fits; the factor-2
    discrepancy between the two conventions is deliberate and documented, not
    reconciled.
    """
    if eta_crit <= 0 or b_peak <= 0 or batch_size <= 0:
        raise ValueError("all arguments must be positive")
    u = math.sqrt(batch_size / b_peak)
    return eta_crit / (0.5 * (u + 1.0 / u))
