"""Command-line entry point.

Subcommands wire the library stages together: ingest | profile | fit-surge |
fit-powerlaw | extrapolate | schedule | mup | grid | noise | synth | report.
Exit codes: 0 success, 1 usage error, 2 data or fit error. The SCALEFIT_OUT
environment variable supplies a default --out directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import __version__, noise_scale
from .extrapolate import fit_bstar_drift, recommend, snap_pow2
from .mup import EXTENDED_TOKEN_BUDGETS, enumerate_grid, width_multipliers
from .powerlaw import consolidate_exponent, fit_powerlaw, refit_fixed_exponent
from .profiles import best_loss_per_batch, build_profile, sensitivity_plot_data
from .report import (
    PLOT_DATA_NAMES,
    PipelineConfig,
    PipelineError,
    dumps_canonical,
    run_pipeline,
)
from .run_store import (
    aggregate_optima,
    emit_csv,
    format_float,
    load_runs,
    parse_int,
    parse_number,
)
from .schedule import ScheduleSpec, emit_step_schedule
from .surge import VARIANTS, fit_all_budgets, variant_by_tag
from .synth import OracleSpec, gen_surface, reference_oracle

__all__ = ["main"]

VARIANT_CHOICES = (
    "no-error",
    "eps",
    "mean-sigma",
    "all",
    "no_error",
    "eps_floor",
    "mean_sigma",
)


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _resolve_out(value: str | None, default: str | None = None) -> str | None:
    if value is not None:
        return value
    env = os.environ.get("SCALEFIT_OUT")
    if env:
        return env
    return default


def _selected_variants(tag: str):
    if tag == "all":
        return VARIANTS
    return (variant_by_tag(tag),)


def _emit(text: str, out_path: Path | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        print(str(out_path))


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="scalefit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"scalefit {__version__}")
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="JSON file of default flag values (explicit flags win)")
    sub = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, _Parser] = {}

    p = sub.add_parser("ingest", parents=[], help="validate a run CSV and emit it canonically")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None, help="directory for runs_canonical.csv")

    p = sub.add_parser("profile", help="best-loss table or plot data at one budget")
    p.add_argument("--input", required=True)
    p.add_argument("--tokens", required=True, type=parse_int)
    p.add_argument("--batch-size", type=parse_int, default=None,
                   help="restrict sensitivity plot data to one batch size")
    p.add_argument("--plot-data", choices=PLOT_DATA_NAMES, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("fit-surge", help="fit the optimal-lr bell curve per budget")
    p.add_argument("--input", required=True)
    p.add_argument("--variant", choices=VARIANT_CHOICES, default="all")
    p.add_argument("--tokens", type=parse_int, default=None, help="only this budget")
    p.add_argument("--refine-optima", action="store_true")
    p.add_argument("--no-mup-grouping", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("fit-powerlaw", help="fit laws for the critical parameters over budget")
    p.add_argument("--input", required=True)
    p.add_argument("--target", choices=("eta-crit", "b-crit", "both"), default="both")
    p.add_argument("--variant", choices=VARIANT_CHOICES, default="all")
    p.add_argument("--fix-exponent", type=float, default=None,
                   help="also refit (a, b) with the exponent pinned to this value")
    p.add_argument("--refine-optima", action="store_true")
    p.add_argument("--no-mup-grouping", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("extrapolate", help="recommend a learning rate at a target budget")
    p.add_argument("--input", required=True)
    p.add_argument("--target-tokens", required=True, type=parse_int)
    p.add_argument("--b-star", type=parse_number, default=None,
                   help="override the fitted best-batch drift")
    p.add_argument("--grid-snap", action="store_true")
    p.add_argument("--refine-optima", action="store_true")
    p.add_argument("--no-mup-grouping", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("schedule", help="generate a warmup-stable(-decay) schedule")
    p.add_argument("--eta-max", required=True, type=parse_number)
    p.add_argument("--total-tokens", required=True, type=parse_int)
    warm = p.add_mutually_exclusive_group()
    warm.add_argument("--warmup-tokens", type=parse_int, default=None)
    warm.add_argument("--warmup-fraction", type=parse_number, default=None)
    warm.add_argument("--no-warmup", action="store_true")
    p.add_argument("--decay", choices=("none", "linear", "cosine"), default="none")
    p.add_argument("--decay-tokens", type=parse_int, default=0)
    p.add_argument("--floor", type=parse_number, default=0.1,
                   help="cosine decay floor as a fraction of eta-max")
    p.add_argument("--batch-size", type=parse_int, default=None)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)

    p = sub.add_parser("mup", help="width-transfer multipliers for a width pair")
    p.add_argument("--d-model", required=True, type=parse_int)
    p.add_argument("--base", required=True, type=parse_int)

    p = sub.add_parser("grid", help="emit the sweep grid as an ingestible CSV template")
    p.add_argument("--extended-horizons", action="store_true",
                   help="include the two longer token budgets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("noise", help="evaluate one noise-scale formula")
    fsub = p.add_subparsers(dest="formula", required=True)
    f = fsub.add_parser("crit-ratio")
    f.add_argument("--e-min", required=True, type=parse_number)
    f.add_argument("--s-min", required=True, type=parse_number)
    f = fsub.add_parser("curv")
    f.add_argument("--tr-h-sigma", required=True, type=parse_number)
    f.add_argument("--gt-h-g", required=True, type=parse_number)
    f = fsub.add_parser("simple-curv")
    f.add_argument("--tr-sigma", required=True, type=parse_number)
    f.add_argument("--g-sq", required=True, type=parse_number)
    f = fsub.add_parser("crit-loss")
    f.add_argument("--b0", required=True, type=parse_number)
    f.add_argument("--alpha-b", required=True, type=parse_number)
    f.add_argument("--loss", required=True, type=parse_number)
    f = fsub.add_parser("sde")
    f.add_argument("--eta", required=True, type=parse_number)
    f.add_argument("--train-tokens", required=True, type=parse_number)
    f.add_argument("--batch-size", required=True, type=parse_number)
    f = fsub.add_parser("norm")
    f.add_argument("--eta", required=True, type=parse_number)
    f.add_argument("--train-tokens", required=True, type=parse_number)
    f.add_argument("--batch-size", required=True, type=parse_number)
    f.add_argument("--w-norm-sq", required=True, type=parse_number)
    f = fsub.add_parser("li")
    f.add_argument("--eta-crit", required=True, type=parse_number)
    f.add_argument("--b-peak", required=True, type=parse_number)
    f.add_argument("--batch-size", required=True, type=parse_number)

    p = sub.add_parser("synth", help="generate a synthetic sweep from an oracle spec")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", default=None, help="oracle spec JSON file")
    src.add_argument("--preset", choices=("reference",), default=None)
    p.add_argument("--out", required=True, help="output CSV file")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--noise-sigma", type=parse_number, default=None)
    p.add_argument("--extended-horizons", action="store_true")

    p = sub.add_parser("report", help="run the full pipeline and write all artifacts")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--target-tokens", type=parse_int, default=None)
    p.add_argument("--b-star", type=parse_number, default=None)
    p.add_argument("--grid-snap", action="store_true")
    p.add_argument("--refine-optima", action="store_true")
    p.add_argument("--no-mup-grouping", action="store_true")
    p.add_argument("--plot-data", choices=PLOT_DATA_NAMES, action="append", default=[])
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--warnings", action="store_true",
                   help="print pipeline warnings after writing artifacts")

    registry.update(sub.choices)
    return parser, registry


def _apply_config(path: str, registry: dict[str, _Parser]) -> dict:
    """Install config-file values as parser defaults (explicit flags win)."""
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    for sp in registry.values():
        actions = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, value in config.items():
            dest = key.replace("-", "_")
            action = actions.get(dest)
            if action is None or dest == "plot_data":
                continue
            if isinstance(value, str) and action.type is not None:
                value = action.type(value)
            defaults[dest] = value
            action.required = False
        sp.set_defaults(**defaults)
    return config


def _cmd_ingest(args) -> int:
    rs = load_runs(args.input)
    out = _resolve_out(args.out)
    text = emit_csv(rs)
    _emit(text, Path(out) / "runs_canonical.csv" if out else None)
    print(f"{len(rs)} records from {args.input}", file=sys.stderr)
    return 0


def _cmd_profile(args) -> int:
    rs = load_runs(args.input)
    out = _resolve_out(args.out)
    if args.plot_data is None:
        table = best_loss_per_batch(rs, args.tokens)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["batch_size", "loss_min", "eta_star"])
        for b in sorted(table):
            loss, eta = table[b]
            writer.writerow([b, format_float(loss), format_float(eta)])
        _emit(buf.getvalue(), Path(out) / "best_loss.csv" if out else None)
        return 0
    if args.plot_data == "sensitivity":
        batches = [args.batch_size] if args.batch_size else sorted(
            {r.batch_size for r in rs.records if r.tokens == args.tokens}
        )
        profs = []
        for b in batches:
            try:
                profs.append(build_profile(rs, batch_size=b, tokens=args.tokens))
            except ValueError:
                continue
        rows = sensitivity_plot_data(profs)
    else:
        table = best_loss_per_batch(rs, args.tokens)
        rows = [[b, table[b][0], f"T={args.tokens}"] for b in sorted(table)]
    text = dumps_canonical({"rows": rows})
    _emit(text, Path(out) / f"plot_data/{args.plot_data}.json" if out else None)
    return 0


def _optima_table(args):
    rs = load_runs(args.input)
    return fit_all_budgets(
        aggregate_optima(
            rs,
            group_by_mup_family=not args.no_mup_grouping,
            refine=args.refine_optima,
        )
    )


def _cmd_fit_surge(args) -> int:
    fits = _optima_table(args)
    variants = {v.tag for v in _selected_variants(args.variant)}
    rows = [
        fit.to_json()
        for tokens in fits.budgets()
        for fit in fits.by_budget[tokens]
        if fit.variant in variants
        and (args.tokens is None or tokens == args.tokens)
    ]
    if not rows:
        raise ValueError("no budget matched the requested filters")
    out = _resolve_out(args.out)
    text = dumps_canonical({"fits": rows, "diagnostics": list(fits.diagnostics)})
    _emit(text, Path(out) / "surge_fits.json" if out else None)
    return 0


def _cmd_fit_powerlaw(args) -> int:
    fits = _optima_table(args)
    targets = (
        ("eta_crit", "b_crit")
        if args.target == "both"
        else (args.target.replace("-", "_"),)
    )
    variants = _selected_variants(args.variant)
    result: dict = {}
    for target in targets:
        attr = target
        sig_attr = f"sigma_{target}"
        section: dict = {"variants": []}
        per_variant = []
        points_by_tag = {}
        for v in variants:
            series = fits.series(v)
            pts = [
                (float(f.tokens), getattr(f, attr), getattr(f, sig_attr))
                for f in series
            ]
            points_by_tag[v.tag] = pts
            law = fit_powerlaw(pts, target, variant=v)
            per_variant.append(law)
            section["variants"].append(law.to_json())
        if len(per_variant) == 3:
            section["consolidated_exponent"] = consolidate_exponent(per_variant).to_json()
        if args.fix_exponent is not None:
            section["fixed_refits"] = [
                refit_fixed_exponent(
                    points_by_tag[v.tag], args.fix_exponent, target, variant=v
                ).to_json()
                for v in variants
            ]
        result[target] = section
    out = _resolve_out(args.out)
    _emit(dumps_canonical(result), Path(out) / "power_laws.json" if out else None)
    return 0


def _cmd_extrapolate(args) -> int:
    out = _resolve_out(args.out)
    config = PipelineConfig(
        input_path=args.input,
        out_dir=None,
        target_tokens=args.target_tokens,
        b_star_override=args.b_star,
        grid_snap=args.grid_snap,
        refine_optima=args.refine_optima,
        group_by_mup_family=not args.no_mup_grouping,
        render_figures=False,
    )
    report = run_pipeline(config)
    rec = report.data["recommendation"]
    text = dumps_canonical(rec)
    _emit(text, Path(out) / "recommendation.json" if out else None)
    print(rec["summary"], file=sys.stderr)
    return 0


def _cmd_schedule(args) -> int:
    if args.no_warmup:
        mode, warm, frac = "disabled", 0, None
    elif args.warmup_fraction is not None:
        mode, warm, frac = "fraction", 0, args.warmup_fraction
    else:
        mode, warm, frac = "absolute", args.warmup_tokens or 0, None
    kind = {"none": "none", "linear": "linear_to_zero", "cosine": "cosine_to_fraction"}[
        args.decay
    ]
    spec = ScheduleSpec(
        eta_max=args.eta_max,
        total_tokens=args.total_tokens,
        warmup_tokens=warm,
        decay_tokens=args.decay_tokens,
        decay_kind=kind,
        floor_fraction=args.floor if kind == "cosine_to_fraction" else 0.0,
        warmup_mode=mode,
        warmup_fraction=frac,
    )
    out = _resolve_out(args.out)
    if args.emit == "json":
        _emit(dumps_canonical(spec.to_json()), Path(out) / "schedule.json" if out else None)
        return 0
    if args.batch_size is None:
        raise ValueError("--emit csv needs --batch-size")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "tokens", "lr"])
    for step, lr in emit_step_schedule(spec, args.batch_size):
        tokens = min(step * args.batch_size, spec.total_tokens)
        writer.writerow([step, tokens, format_float(lr)])
    _emit(buf.getvalue(), Path(out) / "schedule.csv" if out else None)
    return 0


def _cmd_mup(args) -> int:
    spec = width_multipliers(args.d_model, args.base)
    sys.stdout.write(dumps_canonical(spec.to_json()))
    return 0


def _cmd_grid(args) -> int:
    budgets = EXTENDED_TOKEN_BUDGETS if args.extended_horizons else None
    points = enumerate_grid(token_budgets=budgets)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["run_id", "d_model", "d_model_base", "batch_size", "lr", "seed", "tokens", "val_loss"]
    )
    for i, gp in enumerate(points):
        writer.writerow(
            [
                f"grid-{i:06d}",
                gp.d_model,
                gp.d_model_base,
                gp.batch_size,
                format_float(gp.lr),
                args.seed,
                gp.tokens,
                "",
            ]
        )
    out = _resolve_out(args.out)
    _emit(buf.getvalue(), Path(out) / "grid.csv" if out else None)
    return 0


def _cmd_noise(args) -> int:
    if args.formula == "crit-ratio":
        value = noise_scale.b_crit_ratio(args.e_min, args.s_min)
    elif args.formula == "curv":
        value = noise_scale.b_noise_curv(args.tr_h_sigma, args.gt_h_g)
    elif args.formula == "simple-curv":
        value = noise_scale.b_simple_curv(args.tr_sigma, args.g_sq)
    elif args.formula == "crit-loss":
        value = noise_scale.b_crit_from_loss(args.b0, args.alpha_b, args.loss)
    elif args.formula == "sde":
        value = noise_scale.b_noise_sde(args.eta, args.train_tokens, args.batch_size)
    elif args.formula == "norm":
        value = noise_scale.b_noise_norm(
            args.eta, args.train_tokens, args.batch_size, args.w_norm_sq
        )
    else:
        value = noise_scale.eta_star_li(args.eta_crit, args.b_peak, args.batch_size)
    print(repr(float(value)))
    return 0


def _cmd_synth(args) -> int:
    if args.preset == "reference":
        spec = reference_oracle()
    else:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = OracleSpec.from_json(json.load(fh))
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.noise_sigma is not None:
        updates["noise_sigma"] = args.noise_sigma
    if updates:
        spec = OracleSpec.from_json({**spec.to_json(), **updates})
    budgets = EXTENDED_TOKEN_BUDGETS if args.extended_horizons else None
    rs = gen_surface(spec, enumerate_grid(token_budgets=budgets))
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        emit_csv(rs, fh)
    print(f"{len(rs)} records -> {out_path}", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    out = _resolve_out(args.out, default="out")
    config = PipelineConfig(
        input_path=args.input,
        out_dir=out,
        target_tokens=args.target_tokens,
        b_star_override=args.b_star,
        grid_snap=args.grid_snap,
        refine_optima=args.refine_optima,
        group_by_mup_family=not args.no_mup_grouping,
        render_figures=not args.no_figures,
        plot_data=tuple(args.plot_data),
    )
    report = run_pipeline(config)
    for path in report.paths:
        print(path)
    if args.warnings:
        for line in report.warnings:
            print(f"warning: {line}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "profile": _cmd_profile,
    "fit-surge": _cmd_fit_surge,
    "fit-powerlaw": _cmd_fit_powerlaw,
    "extrapolate": _cmd_extrapolate,
    "schedule": _cmd_schedule,
    "mup": _cmd_mup,
    "grid": _cmd_grid,
    "noise": _cmd_noise,
    "synth": _cmd_synth,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser, registry = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    pre_args, rest = pre.parse_known_args(argv if argv is not None else sys.argv[1:])
    config = {}
    try:
        if pre_args.config is not None:
            config = _apply_config(pre_args.config, registry)
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if "plot-data" in config and hasattr(args, "plot_data") and not args.plot_data:
        args.plot_data = list(config["plot-data"])
    try:
        return _COMMANDS[args.command](args)
    except (PipelineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
