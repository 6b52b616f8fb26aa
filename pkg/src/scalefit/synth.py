"""Synthetic loss surfaces with known ground-truth scaling laws.

The generated surface is quadratic in log2(lr) around the bell-curve optimum
implied by the ground-truth critical laws, plus a quadratic penalty in
log2(batch) around an independent best-batch drift law, on top of a
decreasing base loss. Full-scale trainings are not reproducible at desk
scale; these surfaces let the whole pipeline be validated end to end against
parameters it must recover.

Noise is reproducible: each record's deviate comes from a splitmix-style
64-bit mix of the oracle seed, the record's own seed column, and the record
index, pushed through a Box-Muller transform. Same spec, same grid: same
bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .powerlaw import PowerLawParams, eval_powerlaw, power_law
from .run_store import RunRecord, RunSet
from .surge import eval_surge

__all__ = ["OracleSpec", "ground_truth_eta_star", "gen_surface", "reference_oracle"]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

MIN_LOSS = 1e-12


def _mix64(x: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit state into a 64-bit value."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _gauss(oracle_seed: int, record_seed: int, index: int) -> float:
    """Deterministic standard normal for one record of one surface."""
    stream = _mix64((oracle_seed & _MASK64) ^ _mix64(record_seed & _MASK64))
    h1 = _mix64(stream ^ ((index + 1) * _GOLDEN & _MASK64))
    h2 = _mix64(h1)
    u1 = ((h1 >> 11) + 0.5) / 2.0**53
    u2 = ((h2 >> 11) + 0.5) / 2.0**53
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class OracleSpec:
    """Ground truth and noise model for one synthetic surface.

    The three laws give the critical lr, the critical batch, and the
    best-batch drift as functions of the token budget; base_loss_law is the
    loss floor over budget and must stay positive and decreasing across the
    grid in use. curvature_eta and curvature_b are the quadratic penalties in
    log2 space. noise_sigma scales a standard normal that multiplies the loss
    as exp(eps) by default ("lognormal"); the "gaussian" kind adds it
    instead, clamped to keep losses positive.
    """

    eta_crit_law: PowerLawParams
    b_crit_law: PowerLawParams
    b_star_law: PowerLawParams
    base_loss_law: PowerLawParams
    curvature_eta: float = 0.5
    curvature_b: float = 0.05
    noise_sigma: float = 0.0
    noise_kind: str = "lognormal"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.curvature_eta <= 0:
            raise ValueError("curvature_eta must be positive")
        if self.curvature_b < 0:
            raise ValueError("curvature_b must be nonnegative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.noise_kind not in ("lognormal", "gaussian"):
            raise ValueError(f"unknown noise_kind {self.noise_kind!r}")

    def to_json(self) -> dict:
        def law(p: PowerLawParams) -> dict:
            return {"a": p.a, "alpha": p.alpha, "b": p.b}

        return {
            "eta_crit_law": law(self.eta_crit_law),
            "b_crit_law": law(self.b_crit_law),
            "b_star_law": law(self.b_star_law),
            "base_loss_law": law(self.base_loss_law),
            "curvature_eta": self.curvature_eta,
            "curvature_b": self.curvature_b,
            "noise_sigma": self.noise_sigma,
            "noise_kind": self.noise_kind,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "OracleSpec":
        def law(entry: dict, target: str) -> PowerLawParams:
            return power_law(
                a=float(entry["a"]),
                alpha=float(entry["alpha"]),
                b=float(entry.get("b", 0.0)),
                target=target,
            )

        return cls(
            eta_crit_law=law(data["eta_crit_law"], "eta_crit"),
            b_crit_law=law(data["b_crit_law"], "b_crit"),
            b_star_law=law(data["b_star_law"], "b_star"),
            base_loss_law=law(data["base_loss_law"], "base_loss"),
            curvature_eta=float(data.get("curvature_eta", 0.5)),
            curvature_b=float(data.get("curvature_b", 0.05)),
            noise_sigma=float(data.get("noise_sigma", 0.0)),
            noise_kind=str(data.get("noise_kind", "lognormal")),
            seed=int(data.get("seed", 0)),
        )


def reference_oracle(
    noise_sigma: float = 0.0, seed: int = 0, **overrides
) -> OracleSpec:
    """Oracle preset with the reference critical laws.

    eta_crit(T) = 2e9 * T^-1.3 + 3.1e-3, b_crit(T) = 8e-5 * T + 3e5, and a
    square-root best-batch drift crossing 2^18 at T = 2^30.
    """
    spec = dict(
        eta_crit_law=power_law(2.0e9, -1.3, 3.1e-3, target="eta_crit"),
        b_crit_law=power_law(8.0e-5, 1.0, 3.0e5, target="b_crit"),
        b_star_law=power_law(8.0, 0.5, 0.0, target="b_star"),
        base_loss_law=power_law(8.0, -0.1, 1.5, target="base_loss"),
        noise_sigma=noise_sigma,
        seed=seed,
    )
    spec.update(overrides)
    return OracleSpec(**spec)


def ground_truth_eta_star(spec: OracleSpec, tokens: float, batch_size: float) -> float:
    """The optimal lr the surface encodes at (T, B): the bell curve of the laws."""
    eta_crit = eval_powerlaw(spec.eta_crit_law, tokens)
    b_crit = eval_powerlaw(spec.b_crit_law, tokens)
    return eval_surge(eta_crit, b_crit, batch_size)


def _point_loss(spec: OracleSpec, lr: float, batch_size: float, tokens: float) -> float:
    base = eval_powerlaw(spec.base_loss_law, tokens)
    eta_star = ground_truth_eta_star(spec, tokens, batch_size)
    b_star = eval_powerlaw(spec.b_star_law, tokens)
    loss = base
    loss += spec.curvature_eta * (math.log2(lr) - math.log2(eta_star)) ** 2
    loss += spec.curvature_b * (math.log2(batch_size) - math.log2(b_star)) ** 2
    return loss


def gen_surface(spec: OracleSpec, grid, seeds=(0,)) -> RunSet:
    """Evaluate the oracle surface over a grid of run configurations.

    ``grid`` holds (lr, batch_size, tokens, d_model, d_model_base) tuples,
    optionally extended by a seed column; 5-tuples are crossed with ``seeds``.
    The loss does not depend on width (transfer is assumed perfect); widths
    only label the records. Records are emitted in grid order with stable
    synthetic run ids.
    """
    expanded = []
    for point in grid:
        tup = tuple(point)
        if len(tup) == 6:
            expanded.append(tup)
        elif len(tup) == 5:
            expanded.extend(tup + (s,) for s in seeds)
        else:
            raise ValueError(
                "grid entries must be (lr, B, T, d_model, base[, seed])"
            )
    if not expanded:
        raise ValueError("empty grid")

    records = []
    for index, (lr, batch, tokens, width, base, rec_seed) in enumerate(expanded):
        loss = _point_loss(spec, lr, batch, tokens)
        if spec.noise_sigma > 0:
            eps = spec.noise_sigma * _gauss(spec.seed, rec_seed, index)
            if spec.noise_kind == "lognormal":
                loss *= math.exp(eps)
            else:
                loss = max(loss + eps, MIN_LOSS)
        records.append(
            RunRecord(
                run_id=f"oracle-{index:06d}",
                d_model=int(width),
                d_model_base=int(base),
                batch_size=int(batch),
                lr=float(lr),
                seed=int(rec_seed),
                tokens=int(tokens),
                val_loss=float(loss),
            )
        )
    return RunSet(records=tuple(records), provenance=f"oracle(seed={spec.seed})")
