"""Width-transfer multipliers and sweep-grid enumeration."""

import math

import pytest
from hypothesis import given, strategies as st

from scalefit.mup import (
    DEFAULT_BATCH_SIZES,
    DEFAULT_ETA_AXES,
    DEFAULT_TOKEN_BUDGETS,
    EXTENDED_TOKEN_BUDGETS,
    HEAD_DIM,
    enumerate_grid,
    width_multipliers,
)

pow2_widths = st.integers(min_value=6, max_value=14).map(lambda k: 2**k)


def test_base_model_multipliers_are_identity():
    spec = width_multipliers(1024, 1024)
    assert spec.width_ratio == 1.0
    for cls in ("embedding", "hidden", "output"):
        mults = spec.multipliers[cls]
        assert mults.lr == 1.0
        assert mults.init_std == 1.0
        assert mults.output == 1.0


def test_hidden_multipliers_scale_with_width_ratio():
    spec = width_multipliers(1024, 256)
    assert spec.width_ratio == 4.0
    hidden = spec.multipliers["hidden"]
    assert hidden.lr == 0.25
    assert hidden.init_std == 0.5
    assert spec.multipliers["output"].output == 0.25
    emb = spec.multipliers["embedding"]
    assert emb.lr == 1.0 and emb.init_std == 1.0


def test_init_sigma_base_and_head_dim():
    spec = width_multipliers(512, 256)
    assert spec.init_sigma_base == pytest.approx(1 / math.sqrt(256))
    assert spec.head_dim == HEAD_DIM


def test_width_must_be_positive():
    with pytest.raises(ValueError):
        width_multipliers(0, 256)
    with pytest.raises(ValueError):
        width_multipliers(512, -1)


@given(d1=pow2_widths, d2=pow2_widths, base=pow2_widths)
def test_multiplier_composition_through_intermediate_width(d1, d2, base):
    # scaling base->d1 then treating d1 as base up to d2 composes to base->d2
    direct = width_multipliers(d2, base).multipliers["hidden"].lr
    first = width_multipliers(d1, base).multipliers["hidden"].lr
    second = width_multipliers(d2, d1).multipliers["hidden"].lr
    assert first * second == pytest.approx(direct, rel=1e-12)


def test_default_grid_axes():
    assert len(DEFAULT_ETA_AXES[1024]) == 11
    assert len(DEFAULT_ETA_AXES[256]) == 6
    assert DEFAULT_ETA_AXES[1024][0] == 2**-12
    assert DEFAULT_ETA_AXES[1024][-1] == 2**-7
    assert DEFAULT_ETA_AXES[1024][1] == 2**-11.5
    assert DEFAULT_ETA_AXES[256] == tuple(2.0**k for k in range(-11, -5))
    assert DEFAULT_BATCH_SIZES == tuple(2**k for k in range(16, 27, 2))
    assert DEFAULT_TOKEN_BUDGETS == tuple(2**k for k in range(30, 36))
    assert EXTENDED_TOKEN_BUDGETS == DEFAULT_TOKEN_BUDGETS + (2**36, 2**37)


def test_enumerate_grid_default_count_and_uniqueness():
    points = enumerate_grid()
    assert len(points) == 1836
    assert len(set(points)) == 1836
    widths = {p.d_model for p in points}
    bases = {p.d_model_base for p in points}
    assert widths == {256, 512, 1024}
    assert bases == {256, 1024}


def test_enumerate_grid_eta_axis_depends_on_base():
    points = enumerate_grid()
    lrs_1024 = {p.lr for p in points if p.d_model_base == 1024}
    lrs_256 = {p.lr for p in points if p.d_model_base == 256}
    assert lrs_1024 == set(DEFAULT_ETA_AXES[1024])
    assert lrs_256 == set(DEFAULT_ETA_AXES[256])


def test_enumerate_grid_axis_overrides():
    points = enumerate_grid(token_budgets=(2**30,), d_models=(1024,), bases=(1024,))
    assert len(points) == 11 * 6
    assert all(p.tokens == 2**30 for p in points)
