"""Record parsing, CSV round trips, filtering, and optimum aggregation."""

import io
import math

import pytest
from hypothesis import given, strategies as st

from scalefit.run_store import (
    RunRecord,
    RunSet,
    aggregate_optima,
    emit_csv,
    filter_runs,
    format_float,
    ingest_csv,
    parse_int,
    parse_number,
)

HEADER = "run_id,d_model,d_model_base,batch_size,lr,seed,tokens,val_loss"


def make_record(**kw):
    base = dict(
        run_id="r1",
        d_model=1024,
        d_model_base=1024,
        batch_size=2**20,
        lr=2**-9,
        seed=0,
        tokens=2**30,
        val_loss=3.4,
    )
    base.update(kw)
    return RunRecord(**base)


def test_parse_number_power_notation():
    assert parse_number("2^-9") == 2**-9
    assert parse_number("2^-9.5") == 2**-9.5
    assert parse_number("2^20") == 2**20
    assert parse_number(" 2^3 ") == 8.0
    assert parse_number("0.001953125") == 2**-9


def test_parse_int_rejects_fractional_power():
    assert parse_int("2^20") == 2**20
    assert parse_int("1048576") == 2**20
    with pytest.raises(ValueError):
        parse_int("2^20.5")
    with pytest.raises(ValueError):
        parse_int("1.5")


def test_parse_number_rejects_garbage():
    for bad in ("", "abc", "2^", "^9", "2**9"):
        with pytest.raises(ValueError):
            parse_number(bad)


def test_format_float_round_trips():
    for x in (2**-9.5, 1 / 3, 3.4000000000000004, 1e-300):
        assert float(format_float(x)) == x


def test_record_validation():
    with pytest.raises(ValueError, match="val_loss must be positive"):
        make_record(val_loss=-1.0)
    with pytest.raises(ValueError, match="val_loss must be positive"):
        make_record(val_loss=0.0)
    with pytest.raises(ValueError, match="lr"):
        make_record(lr=0.0)
    with pytest.raises(ValueError, match="tokens"):
        make_record(tokens=2**10, batch_size=2**12)
    with pytest.raises(ValueError, match="d_model"):
        make_record(d_model=-256)


def test_ingest_single_row_maps_fields():
    text = HEADER + "\nr1,1024,1024,1048576,0.001953125,0,1073741824,3.40\n"
    rs = ingest_csv(io.StringIO(text))
    assert len(rs) == 1
    rec = rs.records[0]
    assert rec.lr == 2**-9
    assert rec.tokens == 2**30
    assert rec.val_loss == 3.4


def test_ingest_accepts_any_column_order_and_power_notation():
    text = "val_loss,lr,run_id,tokens,batch_size,seed,d_model_base,d_model\n" \
           "3.4,2^-9,r1,2^30,2^20,0,1024,1024\n"
    rec = ingest_csv(io.StringIO(text)).records[0]
    assert rec.lr == 2**-9
    assert rec.batch_size == 2**20


def test_ingest_seed_column_optional():
    text = "run_id,d_model,d_model_base,batch_size,lr,tokens,val_loss\n" \
           "r1,1024,1024,2^20,2^-9,2^30,3.4\n"
    assert ingest_csv(io.StringIO(text)).records[0].seed == 0


def test_ingest_errors_name_row_and_column():
    with pytest.raises(ValueError, match="row 1.*val_loss must be positive"):
        ingest_csv(io.StringIO(HEADER + "\nr1,1024,1024,2^20,2^-9,0,2^30,-1\n"))
    with pytest.raises(ValueError, match="lr"):
        ingest_csv(io.StringIO("run_id,d_model,d_model_base,batch_size,seed,tokens,val_loss\n"))
    with pytest.raises(ValueError, match="empty"):
        ingest_csv(io.StringIO(""))


def test_ingest_rejects_duplicate_config_rows():
    row = "r1,1024,1024,2^20,2^-9,0,2^30,3.4"
    with pytest.raises(ValueError, match="duplicate"):
        ingest_csv(io.StringIO(HEADER + f"\n{row}\n{row}\n"))


def test_emit_ingest_round_trip_is_exact(clean_surface):
    text = emit_csv(clean_surface)
    again = ingest_csv(io.StringIO(text))
    assert again.records == clean_surface.records
    assert emit_csv(again) == text


def test_filter_runs_scalar_range_and_collection(clean_surface):
    only = filter_runs(clean_surface, tokens=2**30, d_model_base=1024)
    assert {r.tokens for r in only.records} == {2**30}
    assert {r.d_model_base for r in only.records} == {1024}

    window = filter_runs(clean_surface, batch_size=(2**18, 2**22))
    assert all(2**18 <= r.batch_size <= 2**22 for r in window.records)

    pair = filter_runs(clean_surface, d_model=[256, 512])
    assert {r.d_model for r in pair.records} == {256, 512}


@given(
    tokens=st.sampled_from([2**30, 2**32, 2**35]),
    width=st.sampled_from([256, 512, 1024]),
)
def test_filter_composition_matches_joint_filter(tokens, width):
    # composing single-field filters must equal the one-shot filter
    rs = _SMALL_SURFACE
    a = filter_runs(filter_runs(rs, tokens=tokens), d_model=width)
    b = filter_runs(rs, tokens=tokens, d_model=width)
    assert a.records == b.records


def test_aggregate_optima_groups_mup_family(clean_surface):
    table = aggregate_optima(clean_surface)
    assert len(table.entries) == 36  # 6 batch sizes x 6 budgets
    for (batch, tokens), entry in table.entries.items():
        assert entry.n_contributing == 6  # 3 widths x 2 bases, one seed
        assert math.isfinite(entry.log2_eta_star_mean)
        assert entry.log2_eta_star_std >= 0.0


def test_aggregate_optima_mixed_widths_need_grouping(clean_surface):
    with pytest.raises(ValueError, match="mixes model widths"):
        aggregate_optima(clean_surface, group_by_mup_family=False)
    narrowed = filter_runs(clean_surface, d_model=1024, d_model_base=1024)
    table = aggregate_optima(narrowed, group_by_mup_family=False)
    assert all(e.n_contributing == 1 for e in table.entries.values())


def test_aggregate_optima_log2_statistics():
    rows = []
    for i, eta_best in enumerate([2**-9, 2**-8]):
        for j, lr in enumerate([2**-10, 2**-9, 2**-8, 2**-7]):
            loss = 3.0 + (math.log2(lr) - math.log2(eta_best)) ** 2
            rows.append(
                make_record(run_id=f"r{i}-{j}", seed=i, lr=lr, val_loss=loss)
            )
    table = aggregate_optima(RunSet(records=tuple(rows)))
    entry = table.entries[(2**20, 2**30)]
    assert entry.log2_eta_star_mean == -8.5
    assert entry.log2_eta_star_std == 0.5  # population std of {-9, -8}


# Module-level so hypothesis does not rebuild it per example.
def _build_small_surface():
    from scalefit.mup import enumerate_grid
    from scalefit.synth import gen_surface, reference_oracle

    return gen_surface(reference_oracle(), enumerate_grid())


_SMALL_SURFACE = _build_small_surface()
