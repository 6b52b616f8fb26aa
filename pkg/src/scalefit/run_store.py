"""Ingestion, validation, filtering, and aggregation of training-run observations.

A run record is one evaluation snapshot of one training run: the model width
pair (for hyperparameter-transfer families), the batch size in tokens, the
peak learning rate of the schedule, the token budget at the snapshot, and the
validation loss reached. Records are grouped per (batch_size, tokens) cell and
reduced to per-cell optimal learning rates with dispersion.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from statistics import fmean, pstdev
from typing import Iterable, Iterator, Mapping, NamedTuple

__all__ = [
    "RunRecord",
    "RunSet",
    "OptimumEntry",
    "OptimumTable",
    "ingest_csv",
    "load_runs",
    "emit_csv",
    "filter_runs",
    "aggregate_optima",
    "parse_number",
    "parse_int",
    "format_float",
]

CSV_FIELDS = (
    "run_id",
    "d_model",
    "d_model_base",
    "batch_size",
    "lr",
    "seed",
    "tokens",
    "val_loss",
)

_POW2_RE = re.compile(r"^\s*2\^(?P<exp>[+-]?\d+(?:\.\d+)?)\s*$")


def parse_number(text: str) -> float:
    """Parse a decimal float or a power-of-two literal like ``2^-9.5``."""
    m = _POW2_RE.match(text)
    if m:
        return 2.0 ** float(m.group("exp"))
    return float(text)


def parse_int(text: str) -> int:
    """Parse a decimal integer or an integral power of two like ``2^20``."""
    m = _POW2_RE.match(text)
    if m:
        exp = float(m.group("exp"))
        if exp < 0 or exp != int(exp):
            raise ValueError(f"{text!r} is not an integer")
        return 1 << int(exp)
    return int(text)


def format_float(x: float) -> str:
    """Canonical decimal form with 17 significant digits (round-trip exact)."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class RunRecord:
    """One evaluation snapshot of one training run."""

    run_id: str
    d_model: int
    d_model_base: int
    batch_size: int
    lr: float
    seed: int
    tokens: int
    val_loss: float

    def __post_init__(self) -> None:
        if self.d_model <= 0:
            raise ValueError("d_model must be positive")
        if self.d_model_base <= 0:
            raise ValueError("d_model_base must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not self.val_loss > 0:
            raise ValueError("val_loss must be positive")
        if self.tokens < self.batch_size:
            raise ValueError("tokens must be at least batch_size")

    def config_key(self) -> tuple:
        return (
            self.d_model,
            self.d_model_base,
            self.batch_size,
            self.lr,
            self.seed,
            self.tokens,
        )


@dataclass(frozen=True)
class RunSet:
    """Immutable ordered collection of validated run records."""

    records: tuple[RunRecord, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        seen_cfg: set[tuple] = set()
        seen_snap: set[tuple[str, int]] = set()
        for r in self.records:
            cfg = r.config_key()
            if cfg in seen_cfg:
                raise ValueError(f"duplicate run configuration {cfg}")
            seen_cfg.add(cfg)
            snap = (r.run_id, r.tokens)
            if snap in seen_snap:
                raise ValueError(f"duplicate (run_id, tokens) pair {snap}")
            seen_snap.add(snap)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[RunRecord]:
        return iter(self.records)

    def budgets(self) -> tuple[int, ...]:
        return tuple(sorted({r.tokens for r in self.records}))

    def batch_sizes(self) -> tuple[int, ...]:
        return tuple(sorted({r.batch_size for r in self.records}))


def ingest_csv(stream: Iterable[str], provenance: str = "<stream>") -> RunSet:
    """Parse a CSV stream of run records.

    The header must contain exactly the record field names, in any column
    order. The ``seed`` column may be omitted (defaults to 0). Numeric fields
    accept plain decimals or ``2^x`` power notation.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty file: no header row") from None
    header = [h.strip() for h in header]
    required = [f for f in CSV_FIELDS if f != "seed"]
    for col in required:
        if col not in header:
            raise ValueError(f"missing column {col!r}")
    for col in header:
        if col not in CSV_FIELDS:
            raise ValueError(f"unknown column {col!r}")
    if len(set(header)) != len(header):
        raise ValueError("repeated column in header")
    idx = {name: header.index(name) for name in header}

    records = []
    for row_num, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ValueError(
                f"row {row_num}: expected {len(header)} fields, got {len(row)}"
            )

        def cell(name: str) -> str:
            return row[idx[name]].strip()

        try:
            rec = RunRecord(
                run_id=cell("run_id"),
                d_model=parse_int(cell("d_model")),
                d_model_base=parse_int(cell("d_model_base")),
                batch_size=parse_int(cell("batch_size")),
                lr=parse_number(cell("lr")),
                seed=int(cell("seed")) if "seed" in idx else 0,
                tokens=parse_int(cell("tokens")),
                val_loss=parse_number(cell("val_loss")),
            )
        except ValueError as exc:
            raise ValueError(f"row {row_num}: {exc}") from None
        records.append(rec)
    if not records:
        raise ValueError("empty file: no data rows")
    return RunSet(records=tuple(records), provenance=provenance)


def load_runs(path: str) -> RunSet:
    """Read a run CSV from ``path``."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return ingest_csv(fh, provenance=str(path))


def emit_csv(rs: RunSet, stream=None) -> str:
    """Write a run set in canonical CSV form; returns the text written.

    Integers are emitted plain, floats with 17 significant digits so that a
    round trip through ingest_csv reproduces the values bit for bit.
    """
    out = stream if stream is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rs.records:
        writer.writerow(
            [
                r.run_id,
                r.d_model,
                r.d_model_base,
                r.batch_size,
                format_float(r.lr),
                r.seed,
                r.tokens,
                format_float(r.val_loss),
            ]
        )
    if stream is None:
        return out.getvalue()
    return ""


def _matches(value, constraint) -> bool:
    if isinstance(constraint, tuple) and len(constraint) == 2:
        lo, hi = constraint
        return lo <= value <= hi
    if isinstance(constraint, (set, frozenset, list)):
        return value in constraint
    return value == constraint


def filter_runs(rs: RunSet, **constraints) -> RunSet:
    """Select records matching per-field constraints, preserving order.

    A constraint is a scalar (equality), a 2-tuple (inclusive range), or a
    list/set (membership). Fields not named are unconstrained.
    """
    for name in constraints:
        if name not in CSV_FIELDS:
            raise ValueError(f"unknown field {name!r}")
    kept = tuple(
        r
        for r in rs.records
        if all(_matches(getattr(r, k), c) for k, c in constraints.items())
    )
    return RunSet(records=kept, provenance=rs.provenance)


class OptimumEntry(NamedTuple):
    log2_eta_star_mean: float
    log2_eta_star_std: float
    n_contributing: int


@dataclass(frozen=True)
class OptimumTable:
    """Per-(batch_size, tokens) optimal learning rates in log2 space."""

    entries: Mapping[tuple[int, int], OptimumEntry]
    diagnostics: tuple[str, ...] = ()

    def budgets(self) -> tuple[int, ...]:
        return tuple(sorted({t for (_, t) in self.entries}))

    def batches_for(self, tokens: int) -> tuple[int, ...]:
        return tuple(sorted(b for (b, t) in self.entries if t == tokens))


def aggregate_optima(
    rs: RunSet,
    group_by_mup_family: bool = True,
    refine: bool = False,
) -> OptimumTable:
    """Reduce a run set to per-(batch_size, tokens) learning-rate optima.

    For each cell, a loss profile is extracted per family member and seed, its
    optimum located, and the member optima averaged in log2 space (the grids
    are geometric, so linear averaging would bias toward larger values). With
    ``group_by_mup_family`` the member axis is (width pair, seed); without it,
    members are seeds only and mixing widths in one cell is an error.

    Cells where a member has fewer than 2 distinct learning rates are skipped
    and reported in the table diagnostics. ``refine`` switches the per-member
    optimum from the grid argmin to the log-parabola estimate.
    """
    from . import profiles

    cells: dict[tuple[int, int], dict[tuple, list[RunRecord]]] = {}
    for r in rs.records:
        cell = cells.setdefault((r.batch_size, r.tokens), {})
        if group_by_mup_family:
            member = (r.d_model, r.d_model_base, r.seed)
        else:
            member = (r.seed,)
        cell.setdefault(member, []).append(r)

    entries: dict[tuple[int, int], OptimumEntry] = {}
    notes: list[str] = []
    for (batch, tokens), members in sorted(cells.items()):
        if not group_by_mup_family:
            widths = {(r.d_model, r.d_model_base) for recs in members.values() for r in recs}
            if len(widths) > 1:
                raise ValueError(
                    f"cell (B={batch}, T={tokens}) mixes model widths {sorted(widths)}; "
                    "use group_by_mup_family=True"
                )
        log2_opts = []
        for member, recs in sorted(members.items()):
            lrs = {r.lr for r in recs}
            if len(lrs) < 2:
                notes.append(
                    f"cell (B={batch}, T={tokens}) member {member}: "
                    f"{len(lrs)} lr value(s), need at least 2; skipped"
                )
                continue
            points = sorted((r.lr, r.val_loss) for r in recs)
            prof = profiles.LossProfile(
                context=(batch, tokens) + tuple(member),
                points=tuple(points),
            )
            opt = profiles.find_optimum(prof, refine=refine)
            log2_opts.append(math.log2(opt.eta_star))
        if not log2_opts:
            continue
        mean = fmean(log2_opts)
        std = pstdev(log2_opts) if len(log2_opts) > 1 else 0.0
        entries[(batch, tokens)] = OptimumEntry(mean, std, len(log2_opts))
    return OptimumTable(entries=entries, diagnostics=tuple(notes))
