"""Warmup-stable-decay schedule evaluation and step emission."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from scalefit.schedule import ScheduleSpec, emit_step_schedule, eval_schedule, schedule_curve

T = 2**22
ETA = 2**-9


def ws(warmup=2**19):
    return ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=warmup,
                        decay_tokens=0, decay_kind="none")


def wsd_linear(decay=2**20):
    return ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=2**19,
                        decay_tokens=decay, decay_kind="linear_to_zero")


def wsd_cosine(floor=0.1):
    return ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=2**19,
                        decay_tokens=2**20, decay_kind="cosine_to_fraction",
                        floor_fraction=floor)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScheduleSpec(eta_max=-1.0, total_tokens=T, warmup_tokens=0,
                     decay_tokens=0, decay_kind="none")
    with pytest.raises(ValueError, match="decay"):
        ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=0,
                     decay_tokens=T + 1, decay_kind="linear_to_zero")
    with pytest.raises(ValueError):
        ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=T,
                     decay_tokens=1, decay_kind="linear_to_zero")
    with pytest.raises(ValueError, match="floor"):
        wsd_cosine(floor=1.0)
    with pytest.raises(ValueError, match="decay_kind"):
        ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=0,
                     decay_tokens=0, decay_kind="exponential")


def test_fraction_mode_derives_warmup_tokens():
    spec = ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=0,
                        decay_tokens=0, decay_kind="none",
                        warmup_mode="fraction", warmup_fraction=1 / 64)
    assert spec.warmup_tokens == T // 64


def test_disabled_mode_starts_at_eta_max():
    spec = ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=0,
                        decay_tokens=0, decay_kind="none", warmup_mode="disabled")
    assert eval_schedule(spec, 0.0) == ETA
    assert eval_schedule(spec, float(T)) == ETA


def test_warmup_is_linear_and_hits_eta_max_exactly():
    spec = ws()
    assert eval_schedule(spec, 0.0) == 0.0
    assert eval_schedule(spec, 2**18) == ETA / 2
    assert eval_schedule(spec, 2**19) == ETA
    assert eval_schedule(spec, 2**20) == ETA  # stable phase


def test_linear_decay_reaches_zero_at_end():
    spec = wsd_linear()
    assert eval_schedule(spec, float(T)) == 0.0
    mid = float(T) - 2**19  # halfway through the decay window
    assert eval_schedule(spec, mid) == pytest.approx(ETA / 2)


def test_cosine_decay_lands_on_floor():
    spec = wsd_cosine(floor=0.1)
    assert eval_schedule(spec, float(T)) == pytest.approx(0.1 * ETA)
    start = float(T - 2**20)
    assert eval_schedule(spec, start) == pytest.approx(ETA)


def test_domain_checked():
    spec = ws()
    with pytest.raises(ValueError):
        eval_schedule(spec, -1.0)
    with pytest.raises(ValueError):
        eval_schedule(spec, float(T) + 1.0)


def test_schedule_curve_matches_pointwise():
    spec = wsd_cosine()
    ts = [0.0, 2**18, 2**19, 2**21, float(T)]
    curve = schedule_curve(spec, ts)
    assert list(curve) == [eval_schedule(spec, t) for t in ts]


@settings(max_examples=60)
@given(
    t=st.floats(min_value=0.0, max_value=float(T)),
    kind=st.sampled_from(["none", "linear_to_zero", "cosine_to_fraction"]),
)
def test_schedule_bounded_by_eta_max(t, kind):
    spec = ScheduleSpec(eta_max=ETA, total_tokens=T, warmup_tokens=2**19,
                        decay_tokens=2**20 if kind != "none" else 0,
                        decay_kind=kind,
                        floor_fraction=0.1 if kind == "cosine_to_fraction" else 0.0)
    lr = eval_schedule(spec, t)
    assert 0.0 <= lr <= ETA * (1 + 1e-15)


def test_emit_step_schedule_counts_and_peak():
    spec = ws()
    batch = 2**16
    rows = emit_step_schedule(spec, batch)
    assert len(rows) == T // batch
    steps = [s for s, _ in rows]
    assert steps == list(range(1, len(rows) + 1))
    # peak reached exactly when cumulative tokens hit the warmup boundary
    peak_step = 2**19 // batch
    assert rows[peak_step - 1][1] == ETA


def test_emit_step_schedule_clamps_final_partial_step():
    spec = ScheduleSpec(eta_max=ETA, total_tokens=1000, warmup_tokens=0,
                        decay_tokens=0, decay_kind="none", warmup_mode="disabled")
    rows = emit_step_schedule(spec, 300)
    assert len(rows) == math.ceil(1000 / 300)
    assert rows[-1][0] == 4
