"""End-to-end pipeline: ingest, aggregate, fit, consolidate, extrapolate.

The report is a plain dict with stable key order and shortest-round-trip
float formatting, so regenerating it from identical inputs yields identical
bytes. Figures are rendered beside the delimited outputs when an output
directory is given; they are derived artifacts and never feed back into the
report.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .extrapolate import fit_bstar_drift, recommend, snap_pow2
from .powerlaw import (
    PowerLawParams,
    combine_with_scatter,
    consolidate_exponent,
    fit_powerlaw,
    refit_fixed_exponent,
)
from .profiles import best_loss_per_batch, build_profile, optimal_batch, sensitivity_curve
from .run_store import RunSet, aggregate_optima, ingest_csv
from .surge import VARIANTS, fit_all_budgets

__all__ = ["PipelineConfig", "PipelineError", "PipelineReport", "run_pipeline", "dumps_canonical"]

PLOT_DATA_NAMES = ("sensitivity", "best-loss")


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: str):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    """Inputs and switches for one pipeline run."""

    input_path: str
    out_dir: str | None = None
    target_tokens: int | None = None
    b_star_override: float | None = None
    grid_snap: bool = False
    refine_optima: bool = False
    group_by_mup_family: bool = True
    render_figures: bool = True
    plot_data: tuple[str, ...] = ()


@dataclass
class PipelineReport:
    """Assembled results plus the list of files written."""

    data: dict
    paths: list[str] = field(default_factory=list)

    @property
    def warnings(self) -> list[str]:
        return list(self.data.get("warnings", []))

    def to_json(self) -> str:
        return dumps_canonical(self.data)


def _clean(obj):
    """Make a structure JSON-safe and deterministic: finite floats stay
    floats (shortest round-trip form), non-finite become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        if math.isfinite(obj):
            return obj
        return str(obj)
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def dumps_canonical(data: dict) -> str:
    return json.dumps(_clean(data), indent=2, allow_nan=False) + "\n"


def _stage(name: str):
    def deco(fn):
        def wrapped(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineError:
                raise
            except (ValueError, OSError) as exc:
                raise PipelineError(name, str(exc)) from exc

        return wrapped

    return deco


@_stage("ingest")
def _ingest(path: str) -> tuple[RunSet, str]:
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    rs = ingest_csv(io.StringIO(raw.decode("utf-8")), provenance=str(path))
    return rs, digest


def run_pipeline(config: PipelineConfig) -> PipelineReport:
    """Run every analysis stage and assemble the deterministic report.

    Stages: aggregate per-cell optima, fit the bell curve per budget under
    all three sigma variants, fit the per-variant power laws, consolidate the
    exponents, refit amplitudes with the exponent pinned, fit the best-batch
    drift, and, when a target budget is given, extrapolate a recommendation.
    Any stage failure raises PipelineError naming the stage; skipped cells
    and budgets are collected as warnings, never dropped silently.
    """
    for name in config.plot_data:
        if name not in PLOT_DATA_NAMES:
            raise PipelineError(
                "config", f"unknown plot-data name {name!r}; have {PLOT_DATA_NAMES}"
            )
    warnings: list[str] = []

    rs, digest = _ingest(config.input_path)

    table = _aggregate(rs, config)
    warnings.extend(table.diagnostics)

    fits = _surge_fits(table)
    warnings.extend(fits.diagnostics)

    power_laws, law_points = _power_laws(fits)

    b_star_section, b_star_law = _bstar_drift(rs, table, warnings)

    recommendation = None
    if config.target_tokens is not None:
        recommendation = _recommend(config, power_laws, b_star_law)

    sensitivity, best_loss = _sensitivity_tables(rs, table, warnings)

    data = {
        "tool": {"name": "scalefit", "version": __version__},
        "input": {
            "path": str(config.input_path),
            "sha256": digest,
            "n_records": len(rs),
        },
        "config": {
            "group_by_mup_family": config.group_by_mup_family,
            "refine_optima": config.refine_optima,
            "target_tokens": config.target_tokens,
            "grid_snap": config.grid_snap,
        },
        "optima": {
            "entries": [
                {
                    "batch_size": b,
                    "tokens": t,
                    "log2_eta_star_mean": e.log2_eta_star_mean,
                    "log2_eta_star_std": e.log2_eta_star_std,
                    "n_contributing": e.n_contributing,
                }
                for (b, t), e in sorted(table.entries.items())
            ]
        },
        "surge_fits": [
            fit.to_json()
            for tokens in fits.budgets()
            for fit in fits.by_budget[tokens]
        ],
        "power_laws": power_laws,
        "b_star": b_star_section,
        "recommendation": recommendation,
        "sensitivity": sensitivity,
        "best_loss": best_loss,
        "warnings": warnings,
    }

    report = PipelineReport(data=data)
    if config.out_dir is not None:
        _write_artifacts(report, table, fits, law_points, config)
    return report


@_stage("aggregate")
def _aggregate(rs: RunSet, config: PipelineConfig):
    return aggregate_optima(
        rs,
        group_by_mup_family=config.group_by_mup_family,
        refine=config.refine_optima,
    )


@_stage("fit-surge")
def _surge_fits(table):
    fits = fit_all_budgets(table)
    if not fits.by_budget:
        raise ValueError("no budget has enough batch sizes to fit")
    return fits


@_stage("fit-powerlaw")
def _power_laws(fits):
    """Per-variant laws, consolidated exponents, and pinned-exponent finals."""
    budgets = fits.budgets()
    if len(budgets) < 4:
        raise ValueError(
            f"need at least 4 budgets for the power-law stage, have {len(budgets)}"
        )
    section: dict = {}
    law_points: dict = {}
    for target, attr, sig_attr in (
        ("eta_crit", "eta_crit", "sigma_eta_crit"),
        ("b_crit", "b_crit", "sigma_b_crit"),
    ):
        variant_fits = []
        points_by_variant = {}
        for variant in VARIANTS:
            series = fits.series(variant)
            pts = [
                (float(f.tokens), getattr(f, attr), getattr(f, sig_attr))
                for f in series
            ]
            points_by_variant[variant.tag] = pts
            variant_fits.append(fit_powerlaw(pts, target, variant=variant))
        cons = consolidate_exponent(variant_fits)
        refits = [
            refit_fixed_exponent(
                points_by_variant[v.tag], cons.alpha_hat, target, variant=v
            )
            for v in VARIANTS
        ]
        a_final, sigma_a = combine_with_scatter(
            [f.a for f in refits], [f.sigma_a for f in refits]
        )
        b_final, sigma_b = combine_with_scatter(
            [f.b for f in refits], [f.sigma_b for f in refits]
        )
        section[target] = {
            "variants": [f.to_json() for f in variant_fits],
            "consolidated_exponent": cons.to_json(),
            "fixed_refits": [f.to_json() for f in refits],
            "final": {
                "a": a_final,
                "alpha": cons.alpha_hat,
                "b": b_final,
                "sigma_a": sigma_a,
                "sigma_alpha": cons.sigma,
                "sigma_b": sigma_b,
            },
        }
        law_points[target] = points_by_variant[VARIANTS[0].tag]
    return section, law_points


@_stage("fit-bstar")
def _bstar_drift(rs: RunSet, table, warnings: list[str]):
    history = []
    for tokens in table.budgets():
        try:
            tbl = best_loss_per_batch(rs, tokens)
        except ValueError as exc:
            warnings.append(f"best-batch at T={tokens}: {exc}")
            continue
        b_star, _ = optimal_batch(tbl)
        history.append((tokens, b_star))
    section: dict = {"history": [[t, b] for t, b in history]}
    law = None
    if len(history) >= 3:
        law = fit_bstar_drift(history)
        section["drift_fit"] = law.to_json()
    else:
        warnings.append(
            f"best-batch drift: {len(history)} budget(s), need 3 for a fit"
        )
        section["drift_fit"] = None
    return section, law


@_stage("extrapolate")
def _recommend(config: PipelineConfig, power_laws: dict, b_star_law):
    final_b = power_laws["b_crit"]["final"]
    final_e = power_laws["eta_crit"]["final"]
    b_crit_law = PowerLawParams(
        a=final_b["a"], alpha=final_b["alpha"], b=final_b["b"], target="b_crit"
    )
    eta_crit_law = PowerLawParams(
        a=final_e["a"], alpha=final_e["alpha"], b=final_e["b"], target="eta_crit"
    )
    if config.b_star_override is not None:
        b_star = float(config.b_star_override)
        source = "override"
    elif b_star_law is not None:
        from .powerlaw import eval_powerlaw

        b_star = float(eval_powerlaw(b_star_law, config.target_tokens))
        source = "drift_fit"
    else:
        raise ValueError(
            "no best-batch drift fit available and no b_star override given"
        )
    if config.grid_snap:
        b_star = snap_pow2(b_star)
    rec = recommend(b_star, b_crit_law, eta_crit_law, config.target_tokens)
    out = rec.to_json()
    out["b_star_source"] = source
    out["summary"] = rec.summary()
    return out


@_stage("sensitivity")
def _sensitivity_tables(rs: RunSet, table, warnings: list[str]):
    sensitivity = []
    best_loss = []
    for tokens in table.budgets():
        for batch in table.batches_for(tokens):
            try:
                prof = build_profile(rs, batch_size=batch, tokens=tokens)
            except ValueError as exc:
                warnings.append(f"sensitivity at (B={batch}, T={tokens}): {exc}")
                continue
            curve = sensitivity_curve(prof)
            sensitivity.append(
                {
                    "tokens": tokens,
                    "batch_size": batch,
                    "points": [[r, d] for r, d in curve.points],
                }
            )
        try:
            tbl = best_loss_per_batch(rs, tokens)
        except ValueError:
            continue
        best_loss.append(
            {
                "tokens": tokens,
                "rows": [[b, tbl[b][0], tbl[b][1]] for b in sorted(tbl)],
            }
        )
    return sensitivity, best_loss


@_stage("write")
def _write_artifacts(report, table, fits, law_points, config: PipelineConfig):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def write_text(rel: str, text: str) -> None:
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        report.paths.append(str(path))

    write_text("report.json", report.to_json())

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["batch_size", "tokens", "log2_eta_star_mean", "log2_eta_star_std", "n_contributing"]
    )
    for (b, t), e in sorted(table.entries.items()):
        writer.writerow(
            [b, t, repr(e.log2_eta_star_mean), repr(e.log2_eta_star_std), e.n_contributing]
        )
    write_text("optima.csv", buf.getvalue())

    write_text("surge_fits.json", dumps_canonical({"fits": report.data["surge_fits"]}))
    write_text("power_laws.json", dumps_canonical(report.data["power_laws"]))
    if report.data["recommendation"] is not None:
        write_text(
            "recommendation.json", dumps_canonical(report.data["recommendation"])
        )

    for name in config.plot_data:
        if name == "sensitivity":
            rows = [
                [pt[0], pt[1], f"B={entry['batch_size']} T={entry['tokens']}"]
                for entry in report.data["sensitivity"]
                for pt in entry["points"]
            ]
        else:
            rows = [
                [row[0], row[1], f"T={entry['tokens']}"]
                for entry in report.data["best_loss"]
                for row in entry["rows"]
            ]
        write_text(f"plot_data/{name}.json", dumps_canonical({"rows": rows}))

    if config.render_figures:
        from . import figures

        figdir = out / "figures"
        report.paths.append(
            figures.render_surge_fits(
                table, fits, VARIANTS[0].tag, figdir / "surge_fits.png"
            )
        )
        finals = {}
        for target in ("eta_crit", "b_crit"):
            f = report.data["power_laws"][target]["final"]
            finals[target] = PowerLawParams(
                a=f["a"], alpha=f["alpha"], b=f["b"], target=target
            )
        report.paths.append(
            figures.render_power_laws(law_points, finals, figdir / "power_laws.png")
        )
        tables = {
            entry["tokens"]: {row[0]: (row[1], row[2]) for row in entry["rows"]}
            for entry in report.data["best_loss"]
        }
        if tables:
            report.paths.append(
                figures.render_best_loss(tables, figdir / "best_loss.png")
            )
        sens_rows = [
            [pt[0], pt[1], f"B={entry['batch_size']} T={entry['tokens']}"]
            for entry in report.data["sensitivity"]
            if entry["tokens"] == max(e["tokens"] for e in report.data["sensitivity"])
            for pt in entry["points"]
        ]
        if sens_rows:
            report.paths.append(
                figures.render_sensitivity(sens_rows, figdir / "sensitivity.png")
            )
