"""Warmup-stable(-decay) learning-rate schedules over continuous token time.

A schedule is defined on [0, total_tokens] and sampled at optimizer-step
boundaries, which keeps the warmup token budget independent of batch size and
sidesteps the fractional-step question when the batch is larger than the
warmup itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ScheduleSpec", "eval_schedule", "schedule_curve", "emit_step_schedule"]

DECAY_KINDS = ("none", "linear_to_zero", "cosine_to_fraction")
WARMUP_MODES = ("absolute", "fraction", "disabled")


@dataclass(frozen=True)
class ScheduleSpec:
    """Shape of one warmup-stable(-decay) schedule.

    ``warmup_mode`` selects how warmup_tokens is set: "absolute" uses the
    given token count, "fraction" derives it as round(warmup_fraction *
    total_tokens), "disabled" forces zero. ``decay_kind`` "none" holds the
    peak to the end; "linear_to_zero" ramps to 0 over the last decay_tokens;
    "cosine_to_fraction" lands at floor_fraction * eta_max.
    """

    eta_max: float
    total_tokens: int
    warmup_tokens: int = 0
    decay_tokens: int = 0
    decay_kind: str = "none"
    floor_fraction: float = 0.0
    warmup_mode: str = "absolute"
    warmup_fraction: float | None = None

    def __post_init__(self) -> None:
        if self.eta_max <= 0:
            raise ValueError("eta_max must be positive")
        if self.total_tokens < 1:
            raise ValueError("total_tokens must be positive")
        if self.decay_kind not in DECAY_KINDS:
            raise ValueError(f"unknown decay_kind {self.decay_kind!r}")
        if self.warmup_mode not in WARMUP_MODES:
            raise ValueError(f"unknown warmup_mode {self.warmup_mode!r}")
        if self.warmup_mode == "fraction":
            if not self.warmup_fraction or self.warmup_fraction <= 0:
                raise ValueError("fraction mode needs a positive warmup_fraction")
            object.__setattr__(
                self, "warmup_tokens", round(self.warmup_fraction * self.total_tokens)
            )
        elif self.warmup_mode == "disabled":
            object.__setattr__(self, "warmup_tokens", 0)
        if self.warmup_tokens < 0 or self.decay_tokens < 0:
            raise ValueError("phase lengths must be nonnegative")
        if self.decay_kind == "none" and self.decay_tokens:
            raise ValueError("decay_tokens must be 0 when decay_kind is none")
        if self.decay_kind != "none" and self.decay_tokens == 0:
            raise ValueError(f"decay_kind {self.decay_kind!r} needs decay_tokens > 0")
        if not 0.0 <= self.floor_fraction < 1.0:
            raise ValueError("floor_fraction must lie in [0, 1)")
        if self.warmup_tokens + self.decay_tokens > self.total_tokens:
            raise ValueError("warmup and decay phases exceed the total budget")

    def to_json(self) -> dict:
        return {
            "eta_max": self.eta_max,
            "total_tokens": self.total_tokens,
            "warmup_tokens": self.warmup_tokens,
            "decay_tokens": self.decay_tokens,
            "decay_kind": self.decay_kind,
            "floor_fraction": self.floor_fraction,
            "warmup_mode": self.warmup_mode,
            "warmup_fraction": self.warmup_fraction,
        }


def eval_schedule(spec: ScheduleSpec, t: float) -> float:
    """Learning rate at token position t, 0 <= t <= total_tokens.

    Warmup is linear from 0, the stable phase holds eta_max, and the decay
    phase ramps linearly to zero or follows a half-cosine to the floor. All
    phase boundaries are continuous.
    """
    if t < 0 or t > spec.total_tokens:
        raise ValueError(
            f"t={t} outside the schedule domain [0, {spec.total_tokens}]"
        )
    if t < spec.warmup_tokens:
        return (t / spec.warmup_tokens) * spec.eta_max
    decay_start = spec.total_tokens - spec.decay_tokens
    if spec.decay_kind == "none" or t < decay_start:
        return spec.eta_max
    progress = (t - decay_start) / spec.decay_tokens
    if spec.decay_kind == "linear_to_zero":
        return (1.0 - progress) * spec.eta_max
    f = spec.floor_fraction
    return spec.eta_max * (f + (1.0 - f) * 0.5 * (1.0 + math.cos(math.pi * progress)))


def schedule_curve(spec: ScheduleSpec, ts: np.ndarray) -> np.ndarray:
    """Vectorized eval_schedule over an array of token positions."""
    t = np.asarray(ts, dtype=float)
    if np.any(t < 0) or np.any(t > spec.total_tokens):
        raise ValueError("token positions outside the schedule domain")
    out = np.full(t.shape, spec.eta_max, dtype=float)
    if spec.warmup_tokens > 0:
        warm = t < spec.warmup_tokens
        out[warm] = (t[warm] / spec.warmup_tokens) * spec.eta_max
    if spec.decay_kind != "none":
        decay_start = spec.total_tokens - spec.decay_tokens
        dec = t >= decay_start
        progress = (t[dec] - decay_start) / spec.decay_tokens
        if spec.decay_kind == "linear_to_zero":
            out[dec] = (1.0 - progress) * spec.eta_max
        else:
            f = spec.floor_fraction
            out[dec] = spec.eta_max * (
                f + (1.0 - f) * 0.5 * (1.0 + np.cos(np.pi * progress))
            )
    return out


def emit_step_schedule(
    spec: ScheduleSpec, batch_size: int
) -> list[tuple[int, float]]:
    """Sample the schedule at optimizer-step boundaries.

    Step k (1-based) consumes tokens up to min(k * batch_size, total_tokens),
    and its learning rate is the schedule value at that token position. The
    token at which the peak is first reached is therefore the warmup budget
    regardless of batch size.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    n_steps = math.ceil(spec.total_tokens / batch_size)
    return [
        (k, eval_schedule(spec, min(k * batch_size, spec.total_tokens)))
        for k in range(1, n_steps + 1)
    ]
