"""Damped Gauss-Newton minimization of weighted least-squares residuals.

The solver expects residual and Jacobian callables over the internal
parameter vector (callers handle any log-space reparameterization) and
returns the optimum together with a covariance estimate scaled by reduced
chi-square, mirroring the relative-sigma convention of common curve-fitting
tools. Directions the data does not constrain get infinite variance rather
than raising.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["LeastSquaresResult", "levenberg_marquardt", "scaled_covariance"]

MAX_ITER = 200
GRAD_TOL = 1e-12
STEP_TOL = 1e-14
CHI2_TOL = 4.0e-16
DAMPING_INIT = 1e-3
DAMPING_FACTOR = 10.0
DAMPING_MAX = 1e15


@dataclass
class LeastSquaresResult:
    x: np.ndarray
    chi2: float
    chi2_reduced: float
    sigma: np.ndarray
    n_points: int
    iterations: int
    converged: bool
    gradient_norm: float


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iter: int = MAX_ITER,
    gtol: float = GRAD_TOL,
) -> LeastSquaresResult:
    """Minimize |r(x)|^2 by damped Gauss-Newton steps.

    Each iteration solves (J'J + lambda*diag(J'J)) dx = -J'r and accepts the
    step only if it lowers chi-square; the damping lambda starts at 1e-3 and
    moves by factors of 10 down on acceptance, up on rejection. Convergence
    is declared when the max-norm of the gradient J'r drops below ``gtol``,
    when the proposed step shrinks below float resolution of the parameters,
    or when an accepted step no longer changes chi-square meaningfully.
    Non-convergence within ``max_iter`` returns a flagged result, not an
    error.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual is not finite at the starting point")
    chi2 = float(r @ r)
    lam = DAMPING_INIT
    converged = False
    grad_norm = np.inf
    iterations = 0

    for iterations in range(1, max_iter + 1):
        J = np.asarray(jacobian(x), dtype=float)
        g = J.T @ r
        grad_norm = float(np.max(np.abs(g)))
        if grad_norm <= gtol:
            converged = True
            break
        A = J.T @ J
        d = np.diag(A).copy()
        floor = max(d.max(), 1e-300) * 1e-14
        d[d < floor] = floor
        stepped = False
        scale = 1.0 + float(np.max(np.abs(x)))
        while lam <= DAMPING_MAX:
            try:
                dx = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= DAMPING_FACTOR
                continue
            if float(np.max(np.abs(dx))) <= STEP_TOL * scale:
                # The model proposes no move distinguishable in floats.
                converged = True
                break
            x_try = x + dx
            r_try = np.asarray(residual(x_try), dtype=float)
            chi2_try = float(r_try @ r_try)
            if np.all(np.isfinite(r_try)) and chi2_try < chi2:
                gain = chi2 - chi2_try
                x, r, chi2 = x_try, r_try, chi2_try
                lam = max(lam / DAMPING_FACTOR, 1e-15)
                stepped = True
                if gain <= CHI2_TOL * max(chi2, 1e-300):
                    converged = True
                break
            lam *= DAMPING_FACTOR
        if converged or not stepped:
            break

    J = np.asarray(jacobian(x), dtype=float)
    sigma, chi2_red = scaled_covariance(J, r)
    return LeastSquaresResult(
        x=x,
        chi2=chi2,
        chi2_reduced=chi2_red,
        sigma=sigma,
        n_points=len(r),
        iterations=iterations,
        converged=converged,
        gradient_norm=grad_norm,
    )


def scaled_covariance(J: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-parameter uncertainties from the Jacobian at the optimum.

    Returns (sigma, chi2_reduced) where sigma[i] is the square root of the
    i-th diagonal element of inv(J'J) * chi2_reduced. The reduced chi-square
    is chi2/(n - p), or 1 when there are no spare degrees of freedom.

    The normal matrix is rescaled to unit diagonal before inversion so that
    the detection of unconstrained directions does not depend on parameter
    units; eigendirections with negligible curvature after rescaling are
    reported as infinite sigma on every parameter they touch.
    """
    n, p = J.shape
    chi2 = float(r @ r)
    dof = n - p
    chi2_red = chi2 / dof if dof > 0 else 1.0
    A = J.T @ J
    d = np.sqrt(np.diag(A))
    dead = d <= 0.0
    scale = np.where(dead, 1.0, d)
    A_hat = A / np.outer(scale, scale)
    eigval, eigvec = np.linalg.eigh(A_hat)
    good = eigval > max(eigval.max(), 0.0) * 1e-12
    var = np.zeros(p)
    for j in range(p):
        if dead[j] or np.any(~good & (np.abs(eigvec[j, :]) > 1e-12)):
            var[j] = np.inf
        else:
            var[j] = (
                float(np.sum(eigvec[j, good] ** 2 / eigval[good]))
                * chi2_red
                / scale[j] ** 2
            )
    return np.sqrt(var), chi2_red
