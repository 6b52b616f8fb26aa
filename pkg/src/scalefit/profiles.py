"""Loss profiles over learning rate: optima, sensitivity, best loss per batch.

A profile is validation loss as a function of peak learning rate at fixed
(batch size, token budget, model). The optimum is read off the grid by
default; an opt-in log-parabola refinement interpolates the vertex for
surfaces that are smooth in log2(lr).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .run_store import RunSet

__all__ = [
    "LossProfile",
    "OptimumEstimate",
    "SensitivityCurve",
    "build_profile",
    "find_optimum",
    "sensitivity_curve",
    "best_loss_per_batch",
    "optimal_batch",
    "sensitivity_plot_data",
    "best_loss_plot_data",
]


@dataclass(frozen=True)
class LossProfile:
    """Validation loss vs learning rate at a fixed context.

    ``context`` identifies the cell the profile came from (batch size, token
    budget, and whatever model/seed fields were pinned). ``points`` is sorted
    strictly ascending in lr.
    """

    context: tuple
    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("profile needs at least 2 points")
        lrs = [lr for lr, _ in self.points]
        if sorted(lrs) != lrs or len(set(lrs)) != len(lrs):
            raise ValueError("profile points must be strictly increasing in lr")
        for lr, loss in self.points:
            if not (lr > 0 and loss > 0):
                raise ValueError("profile points must have positive lr and loss")

    @property
    def lrs(self) -> tuple[float, ...]:
        return tuple(lr for lr, _ in self.points)

    @property
    def losses(self) -> tuple[float, ...]:
        return tuple(loss for _, loss in self.points)


@dataclass(frozen=True)
class OptimumEstimate:
    """Location and value of a profile's loss minimum.

    ``grid_resolution`` is the largest log2 gap between the optimum and its
    grid neighbors; consumers can treat one grid step as the noise floor of
    the estimate.
    """

    eta_star: float
    loss_min: float
    grid_resolution: float


@dataclass(frozen=True)
class SensitivityCurve:
    """Loss penalty for missing the optimal learning rate.

    ``points`` is keyed by the ratio eta/eta_star, ``raw`` by eta itself; both
    carry delta_loss = loss(eta) - loss_min.
    """

    points: tuple[tuple[float, float], ...]
    raw: tuple[tuple[float, float], ...]


def build_profile(
    rs: RunSet,
    *,
    batch_size: int,
    tokens: int,
    d_model: int | None = None,
    d_model_base: int | None = None,
    seed: int | None = None,
) -> LossProfile:
    """Extract the loss-vs-lr profile for one cell of a run set.

    Fields left as None are unconstrained; records that then share an lr value
    (different seeds, say) have their losses averaged arithmetically, since
    losses live on a linear scale.
    """
    by_lr: dict[float, list[float]] = {}
    for r in rs.records:
        if r.batch_size != batch_size or r.tokens != tokens:
            continue
        if d_model is not None and r.d_model != d_model:
            continue
        if d_model_base is not None and r.d_model_base != d_model_base:
            continue
        if seed is not None and r.seed != seed:
            continue
        by_lr.setdefault(r.lr, []).append(r.val_loss)
    if len(by_lr) < 2:
        raise ValueError(
            f"need at least 2 distinct lr values for (B={batch_size}, T={tokens}), "
            f"found {len(by_lr)}"
        )
    points = tuple(
        (lr, sum(losses) / len(losses)) for lr, losses in sorted(by_lr.items())
    )
    return LossProfile(
        context=(batch_size, tokens, d_model, d_model_base, seed),
        points=points,
    )


def find_optimum(p: LossProfile, refine: bool = False) -> OptimumEstimate:
    """Locate the profile minimum; ties break toward the smaller lr.

    With ``refine`` a least-squares parabola in log2(lr) is fit through all
    points and its vertex returned, which recovers off-grid optima exactly on
    quadratic-in-log surfaces. The refined loss_min is the parabola value at
    the vertex and so may sit below every sampled point. Refinement falls
    back to the grid argmin when the profile has fewer than 3 points or the
    fitted curvature is not positive.
    """
    losses = p.losses
    lrs = p.lrs
    i = min(range(len(losses)), key=lambda k: (losses[k], lrs[k]))
    gaps = []
    if i > 0:
        gaps.append(math.log2(lrs[i] / lrs[i - 1]))
    if i < len(lrs) - 1:
        gaps.append(math.log2(lrs[i + 1] / lrs[i]))
    resolution = max(gaps)

    if refine and len(lrs) >= 3:
        x = np.log2(np.asarray(lrs, dtype=float))
        y = np.asarray(losses, dtype=float)
        c2, c1, c0 = np.polyfit(x, y, 2)
        if c2 > 0:
            x_star = -c1 / (2.0 * c2)
            return OptimumEstimate(
                eta_star=float(2.0**x_star),
                loss_min=float(c0 - c1 * c1 / (4.0 * c2)),
                grid_resolution=resolution,
            )
    return OptimumEstimate(
        eta_star=lrs[i], loss_min=losses[i], grid_resolution=resolution
    )


def sensitivity_curve(p: LossProfile) -> SensitivityCurve:
    """Delta loss relative to the profile minimum, keyed by eta/eta_star and eta."""
    opt = find_optimum(p)
    points = tuple(
        (lr / opt.eta_star, loss - opt.loss_min) for lr, loss in p.points
    )
    raw = tuple((lr, loss - opt.loss_min) for lr, loss in p.points)
    return SensitivityCurve(points=points, raw=raw)


def best_loss_per_batch(
    rs: RunSet, tokens: int
) -> dict[int, tuple[float, float]]:
    """Best loss over the lr grid per batch size at one token budget.

    Returns batch_size -> (loss_min, eta_star), batch sizes ascending. Seeds
    and family members sharing an lr are averaged as in build_profile.
    """
    batches = sorted({r.batch_size for r in rs.records if r.tokens == tokens})
    table: dict[int, tuple[float, float]] = {}
    for b in batches:
        try:
            prof = build_profile(rs, batch_size=b, tokens=tokens)
        except ValueError:
            continue
        opt = find_optimum(prof)
        table[b] = (opt.loss_min, opt.eta_star)
    if not table:
        raise ValueError(f"no batch size at T={tokens} has a valid profile")
    return table


def optimal_batch(table: Mapping[int, tuple[float, float]]) -> tuple[int, float]:
    """Batch size with the lowest best loss; ties break toward smaller batch."""
    if not table:
        raise ValueError("empty best-loss table")
    b_star = min(sorted(table), key=lambda b: table[b][0])
    return b_star, table[b_star][0]


def sensitivity_plot_data(
    profiles: Sequence[LossProfile], labels: Sequence[str] | None = None
) -> list[list]:
    """Flatten sensitivity curves into (x, y, series-label) rows for plotting."""
    rows: list[list] = []
    for k, prof in enumerate(profiles):
        label = labels[k] if labels is not None else _context_label(prof.context)
        for ratio, dloss in sensitivity_curve(prof).points:
            rows.append([ratio, dloss, label])
    return rows


def best_loss_plot_data(
    table: Mapping[int, tuple[float, float]], label: str
) -> list[list]:
    """Flatten a best-loss-per-batch table into (x, y, series-label) rows."""
    return [[b, table[b][0], label] for b in sorted(table)]


def _context_label(context: tuple) -> str:
    parts = []
    names = ("B", "T", "d", "base", "seed")
    for name, value in zip(names, context):
        if value is not None:
            parts.append(f"{name}={_pow2_or_plain(value)}")
    return " ".join(parts)


def _pow2_or_plain(value) -> str:
    if isinstance(value, int) and value > 0:
        exp = value.bit_length() - 1
        if value == 1 << exp:
            return f"2^{exp}"
    return str(value)
