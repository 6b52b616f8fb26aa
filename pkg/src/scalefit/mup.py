"""Width-scaling multipliers for hyperparameter transfer, and the sweep grid.

Multipliers follow the standard maximal-update prescription relative to a
base width: with m = d_model / d_model_base, matrix-like (hidden) parameters
scale their learning rate by 1/m and their init std by 1/sqrt(m), embeddings
are untouched, and the output logits pick up a 1/m forward multiplier. At
m = 1 everything is 1, which is exactly the standard parametrization. The
prescription is inherited from the published transfer recipe; finer points
(attention scaling, biases) follow that source and are recorded here as
metadata only, since nothing in this package trains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

__all__ = [
    "ClassMultipliers",
    "MupModelSpec",
    "width_multipliers",
    "GridPoint",
    "enumerate_grid",
    "DEFAULT_ETA_AXES",
    "DEFAULT_BATCH_SIZES",
    "DEFAULT_TOKEN_BUDGETS",
    "DEFAULT_WIDTHS",
    "DEFAULT_BASES",
    "EXTENDED_TOKEN_BUDGETS",
]

HEAD_DIM = 128


class ClassMultipliers(NamedTuple):
    lr: float
    init_std: float
    output: float


@dataclass(frozen=True)
class MupModelSpec:
    """Per-parameter-class multipliers for one (d_model, d_model_base) pair."""

    d_model: int
    d_model_base: int
    width_ratio: float
    init_sigma_base: float
    multipliers: dict[str, ClassMultipliers] = field(default_factory=dict)
    head_dim: int = HEAD_DIM

    def to_json(self) -> dict:
        return {
            "d_model": self.d_model,
            "d_model_base": self.d_model_base,
            "width_ratio": self.width_ratio,
            "init_sigma_base": self.init_sigma_base,
            "head_dim": self.head_dim,
            "multipliers": {
                cls: {"lr": m.lr, "init_std": m.init_std, "output": m.output}
                for cls, m in self.multipliers.items()
            },
        }


def width_multipliers(d_model: int, d_model_base: int) -> MupModelSpec:
    """Multipliers that transfer base-width hyperparameters to d_model.

    Head-dimension divisibility is the caller's concern; the fixed head size
    is carried as metadata.
    """
    if d_model <= 0 or d_model_base <= 0:
        raise ValueError("widths must be positive")
    m = d_model / d_model_base
    return MupModelSpec(
        d_model=d_model,
        d_model_base=d_model_base,
        width_ratio=m,
        init_sigma_base=1.0 / math.sqrt(d_model_base),
        multipliers={
            "embedding": ClassMultipliers(lr=1.0, init_std=1.0, output=1.0),
            "hidden": ClassMultipliers(lr=1.0 / m, init_std=1.0 / math.sqrt(m), output=1.0),
            "output": ClassMultipliers(lr=1.0, init_std=1.0, output=1.0 / m),
        },
    )


class GridPoint(NamedTuple):
    lr: float
    batch_size: int
    tokens: int
    d_model: int
    d_model_base: int


def _pow2_axis(start: float, stop: float, step: float) -> tuple[float, ...]:
    n = round((stop - start) / step) + 1
    return tuple(2.0 ** (start + k * step) for k in range(n))


DEFAULT_ETA_AXES: dict[int, tuple[float, ...]] = {
    1024: _pow2_axis(-12.0, -7.0, 0.5),
    256: _pow2_axis(-11.0, -6.0, 1.0),
}
DEFAULT_BATCH_SIZES = tuple(2**k for k in range(16, 27, 2))
DEFAULT_TOKEN_BUDGETS = tuple(2**k for k in range(30, 36))
EXTENDED_TOKEN_BUDGETS = DEFAULT_TOKEN_BUDGETS + (2**36, 2**37)
DEFAULT_WIDTHS = (256, 512, 1024)
DEFAULT_BASES = (256, 1024)


def enumerate_grid(
    eta_axes: dict[int, Sequence[float]] | None = None,
    batch_sizes: Sequence[int] | None = None,
    token_budgets: Sequence[int] | None = None,
    d_models: Sequence[int] | None = None,
    bases: Sequence[int] | None = None,
) -> list[GridPoint]:
    """Enumerate the sweep grid; defaults reproduce the reference axes.

    The learning-rate axis depends on the base width (each transfer family
    swept its own geometric grid), so eta_axes maps base -> lr values. Any
    axis can be overridden, e.g. extending token_budgets to reach the longer
    horizons. Points are emitted in deterministic nested order: base, then
    width, budget, batch size, learning rate.
    """
    eta_axes = dict(DEFAULT_ETA_AXES) if eta_axes is None else dict(eta_axes)
    batch_sizes = DEFAULT_BATCH_SIZES if batch_sizes is None else tuple(batch_sizes)
    token_budgets = (
        DEFAULT_TOKEN_BUDGETS if token_budgets is None else tuple(token_budgets)
    )
    d_models = DEFAULT_WIDTHS if d_models is None else tuple(d_models)
    bases = DEFAULT_BASES if bases is None else tuple(bases)

    points = []
    for base in bases:
        if base not in eta_axes:
            raise ValueError(f"no lr axis for base width {base}")
        for width in d_models:
            for tokens in token_budgets:
                for batch in batch_sizes:
                    for lr in eta_axes[base]:
                        points.append(
                            GridPoint(
                                lr=float(lr),
                                batch_size=int(batch),
                                tokens=int(tokens),
                                d_model=int(width),
                                d_model_base=int(base),
                            )
                        )
    return points
