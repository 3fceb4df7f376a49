import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inference_energy.energy_model import (
    EffectiveLengthMode,
    NodeSpec,
    apply_alpha,
    coupled_node_power,
    effective_length,
    energy_per_query,
)

REF = NodeSpec(8, 11.3, 2.7)


def test_hand_evaluation():
    # (1.2/3.6) * (7.91*300/3661.85)
    assert energy_per_query(1.2, 7.91, 300, 3661.85) == pytest.approx(0.21601, rel=1e-4)
    assert energy_per_query(1.2, 7.91, 300, 3661.85) == pytest.approx((1.2 / 3.6) * (7.91 * 300 / 3661.85), rel=1e-15)


def test_zero_length_zero_energy():
    assert energy_per_query(1.3, 9.0, 0, 1234.0) == 0.0


def test_linear_in_pue():
    assert energy_per_query(2.4, 7.91, 300, 3661.85) == pytest.approx(0.43202, rel=1e-4)
    assert energy_per_query(2.4, 7.91, 300, 3661.85) == pytest.approx(2 * energy_per_query(1.2, 7.91, 300, 3661.85), rel=1e-15)


@pytest.mark.parametrize("pue, tps", [(1.2, 0.0), (1.2, -1.0), (0.99, 10.0)])
def test_invalid_inputs(pue, tps):
    with pytest.raises(ValueError):
        energy_per_query(pue, 7.0, 10, tps)


def test_vectorized():
    out = energy_per_query(np.array([1.2, 2.4]), 7.91, 300, 3661.85)
    assert out.shape == (2,)
    assert out[1] == pytest.approx(2 * out[0])


@pytest.mark.parametrize(
    "l_in, l_out, mode, expected",
    [
        (500, 300, "output_only", 300),
        (500, 300, "input_plus_output", 800),
        (0, 42, "output_only", 42),
        (0, 42, "input_plus_output", 42),
    ],
)
def test_effective_length(l_in, l_out, mode, expected):
    assert effective_length(l_in, l_out, mode) == expected
    assert effective_length(l_in, l_out, EffectiveLengthMode(mode)) == expected


def test_coupled_power_examples():
    assert coupled_node_power(0, 5000, REF) == pytest.approx(2.7, rel=1e-15)
    assert coupled_node_power(5000, 5000, REF) == 0.9 * 11.3
    assert coupled_node_power(5000, 5000, REF) == pytest.approx(10.17, rel=1e-12)
    assert coupled_node_power(2500, 5000, REF) == pytest.approx(6.435, rel=1e-12)


def test_coupled_power_rejects_above_cap():
    with pytest.raises(ValueError):
        coupled_node_power(5001, 5000, REF)


def test_coupled_power_affine_monotone():
    tps = np.linspace(0, 1000, 101)
    p = coupled_node_power(tps, 1000, REF)
    assert np.all(np.diff(p) > 0)
    assert np.allclose(np.diff(p, 2), 0, atol=1e-12)


def test_alpha():
    assert apply_alpha(0.34, 2.0) == pytest.approx(0.17, rel=1e-15)
    assert apply_alpha(0.7, 1.0) == 0.7
    assert apply_alpha(4.32, 4.32) == 1.0
    with pytest.raises(ValueError):
        apply_alpha(1.0, 0.0)


def test_node_specs():
    assert NodeSpec.for_gpus(8) == NodeSpec(8, 11.3, 2.7)
    assert NodeSpec.for_gpus(10).p_max_kw == 14.1
    with pytest.raises(ValueError):
        NodeSpec(8, 2.0, 2.7)


pos = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)
factor = st.floats(min_value=0.01, max_value=100.0)


@settings(max_examples=300)
@given(st.floats(min_value=1.0, max_value=3.0), pos, pos, pos, factor)
def test_homogeneity(pue, p, l_eff, tps, c):
    e = energy_per_query(pue, p, l_eff, tps)
    assert energy_per_query(pue * max(c, 1.0), p, l_eff, tps) == pytest.approx(e * max(c, 1.0), rel=1e-12)
    assert energy_per_query(pue, p * c, l_eff, tps) == pytest.approx(e * c, rel=1e-12)
    assert energy_per_query(pue, p, l_eff * c, tps) == pytest.approx(e * c, rel=1e-12)
    assert energy_per_query(pue, p, l_eff, tps * c) == pytest.approx(e / c, rel=1e-12)


@settings(max_examples=300)
@given(st.floats(min_value=1.0, max_value=3.0), pos, pos, pos, st.floats(min_value=0.05, max_value=50))
def test_alpha_equivalence(pue, p, l_eff, tps, alpha):
    assert apply_alpha(energy_per_query(pue, p, l_eff, tps), alpha) == pytest.approx(
        energy_per_query(pue, p, l_eff, tps * alpha), rel=1e-12
    )


@given(pos, pos)
def test_energy_increasing_in_length_at_fixed_tps(a, b):
    lo, hi = sorted((a, b))
    if lo < hi:
        assert energy_per_query(1.2, 7.0, lo, 500.0) < energy_per_query(1.2, 7.0, hi, 500.0)
