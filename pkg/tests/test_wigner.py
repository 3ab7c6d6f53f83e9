import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import oracles
from homsync import FockCutoff, SingleModeState, TwoModeState, hom_state
from homsync.quadrature import single_density
from homsync.wigner import (
    WignerSlice,
    default_slice_grid,
    minimum_wigner_value,
    wigner_element,
    wigner_single,
    wigner_single_grid,
    wigner_slice,
    wigner_two_mode,
)

CUT = FockCutoff(5)
ONE_OVER_PI = 0.3183098861837907


def test_wigner_element_frozen_origin_values():
    assert_allclose(wigner_element(0, 0, 0.0, 0.0), ONE_OVER_PI, atol=1e-15)
    assert_allclose(wigner_element(1, 1, 0.0, 0.0), -ONE_OVER_PI, atol=1e-15)
    assert_allclose(wigner_element(2, 2, 0.0, 0.0), ONE_OVER_PI, atol=1e-15)


def test_wigner_element_against_defining_integral():
    pts = [(0.0, 0.0), (0.7, -0.3), (-1.2, 0.5), (1.5, 1.5)]
    for m in range(4):
        for n in range(4):
            for x, p in pts:
                ref = oracles.wigner_element_integral(m, n, x, p)
                val = wigner_element(m, n, x, p)
                assert_allclose(val, ref, atol=1e-9)


def test_wigner_element_hermiticity():
    x, p = 0.9, -0.4
    for m in range(4):
        for n in range(4):
            assert_allclose(
                wigner_element(n, m, x, p),
                np.conj(wigner_element(m, n, x, p)),
                atol=1e-15,
            )


def test_single_photon_admixture_closed_form():
    g = np.linspace(-3.0, 3.0, 61)
    for w in (0.3, 0.5, 0.8):
        st = SingleModeState.from_number_probabilities(CUT, [1.0 - w, w])
        W = wigner_single_grid(st, g, g)
        X, P = np.meshgrid(g, g, indexing="ij")
        r2 = X ** 2 + P ** 2
        expect = (1.0 / math.pi) * np.exp(-r2) * ((1.0 - 2.0 * w) + 2.0 * w * r2)
        assert_allclose(W, expect, atol=1e-12)


def test_negativity_appears_above_half_weight():
    below = SingleModeState.from_number_probabilities(CUT, [0.51, 0.49])
    above = SingleModeState.from_number_probabilities(CUT, [0.49, 0.51])
    assert minimum_wigner_value(below) > 0.0
    assert minimum_wigner_value(above) < 0.0


def test_wigner_normalizes_and_reproduces_homodyne_marginal():
    st = SingleModeState.from_number_probabilities(CUT, [0.2, 0.5, 0.3])
    g = -6.0 + 0.02 * np.arange(601)
    W = wigner_single_grid(st, g, g)
    total = np.trapezoid(np.trapezoid(W, dx=0.02, axis=1), dx=0.02)
    assert_allclose(total, 1.0, atol=1e-9)
    marginal = np.trapezoid(W, dx=0.02, axis=1)  # integrate out p
    assert_allclose(marginal, single_density(st, 0.0, g), atol=1e-9)


def test_two_mode_wigner_factorizes_on_products():
    s1 = SingleModeState.from_number_probabilities(CUT, [0.3, 0.7])
    s2 = SingleModeState.from_number_probabilities(CUT, [0.6, 0.1, 0.3])
    prod = TwoModeState.product(s1, s2)
    g = np.linspace(-2.0, 2.0, 9)
    sl = wigner_slice(prod, ("x1", "x2"), {"p1": 0.3, "p2": -0.2},
                      grid1=g, grid2=g)
    w1 = wigner_single(s1, g, np.full_like(g, 0.3))
    w2 = wigner_single(s2, g, np.full_like(g, -0.2))
    assert_allclose(sl.values, np.outer(w1, w2), atol=1e-12)


def test_same_mode_slice_reduces_to_single_wigner():
    s1 = SingleModeState.from_number_probabilities(CUT, [0.4, 0.6])
    prod = TwoModeState.product(s1, SingleModeState.vacuum(CUT))
    g = np.linspace(-2.0, 2.0, 11)
    sl = wigner_slice(prod, ("x1", "p1"), grid1=g, grid2=g)
    expect = wigner_single_grid(s1, g, g) * wigner_element(0, 0, 0.0, 0.0).real
    assert_allclose(sl.values, expect, atol=1e-12)


def test_bunched_state_slice_is_negative_somewhere():
    sl = wigner_slice(hom_state(CUT), ("x1", "x2"))
    val, a1, a2 = sl.min_location()
    assert val < 0.0
    assert val == sl.values.min()
    # the plane carries the interference structure: deep negativity
    assert val < -0.01


def test_default_slice_grid_contains_origin():
    g = default_slice_grid()
    assert g.size == 121
    assert g[0] == -3.0 and g[-1] == 3.0
    assert g[60] == 0.0


def test_slice_axis_validation():
    st = hom_state(CUT)
    with pytest.raises(ValueError):
        wigner_slice(st, ("x1", "x1"))
    with pytest.raises(ValueError):
        wigner_slice(st, ("x1", "q9"))
    with pytest.raises(ValueError):
        wigner_slice(st, ("x1", "x2"), {"x1": 1.0})


def test_slice_file_roundtrip_bit_exact(tmp_path):
    g = np.linspace(-1.5, 1.5, 13)
    sl = wigner_slice(hom_state(CUT, 0.4), ("x1", "p2"), {"p1": 0.1},
                      grid1=g, grid2=g)
    csv_path, json_path = tmp_path / "w.csv", tmp_path / "w.json"
    sl.to_files(csv_path, json_path)
    back = WignerSlice.from_files(csv_path, json_path)
    assert back.axis_names == sl.axis_names
    assert back.fixed == sl.fixed
    assert np.array_equal(back.axis1, sl.axis1)
    assert np.array_equal(back.values, sl.values)


def test_pointwise_two_mode_broadcasting():
    st = hom_state(CUT)
    v = wigner_two_mode(st, 0.0, 0.0, 0.0, 0.0)
    assert isinstance(v, float)
    arr = wigner_two_mode(st, np.linspace(-1, 1, 5), 0.0, 0.5, 0.0)
    assert arr.shape == (5,)
