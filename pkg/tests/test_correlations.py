import math

import numpy as np
import pytest

from dimergas.correlations import (
    WICK_HEIGHT_FACTOR,
    CorrelationSpec,
    _connected_tensor_integral,
    _pair_density_from_entries,
    f_connected,
    f_connected_positive_negative,
    four_point_density,
    positivity_bounds,
    s2,
    s2_integrand,
    scaled_inv_entry,
    wick_defect,
)
from dimergas.greens import bessel_k

LAM10 = (1.0, 0.0)


def test_scaled_inv_entry_values():
    # (b0, w1) on the x axis: the K1 term carries a factor y
    assert scaled_inv_entry(0, 1, 1.3, 0.0, (0.8, 0.6)) == pytest.approx(
        0.6 * bessel_k(0, 1.3) / math.pi, rel=1e-13)
    # frozen composition (K1(1) + K0(1)) / pi
    assert scaled_inv_entry(0, 0, 1.0, 0.0, LAM10) == pytest.approx(
        0.3256092629542767, rel=1e-12)
    assert scaled_inv_entry(0, 0, 1.0, 0.0, LAM10) == pytest.approx(
        (bessel_k(1, 1.0) + bessel_k(0, 1.0)) / math.pi, rel=1e-13)
    with pytest.raises(ValueError):
        scaled_inv_entry(0, 0, 0.0, 0.0, LAM10)
    with pytest.raises(ValueError):
        scaled_inv_entry(2, 0, 1.0, 0.0, LAM10)
    with pytest.raises(ValueError):
        scaled_inv_entry(0, 0, 1.0, 0.0, (0.0, 0.0))


def test_s2_integrand_values():
    d = s2_integrand(0.0, 1.0, LAM10)
    expected = (18 / math.pi**2) * (bessel_k(0, 1.0)**2 + bessel_k(1, 1.0)**2)
    assert d == pytest.approx(expected, rel=1e-13)
    assert d == pytest.approx(0.98401, abs=5e-5)
    assert d > 0
    # depends on lambda only through its norm
    assert s2_integrand(0.0, 2.0, (0.6, 0.8)) == pytest.approx(
        s2_integrand(0.0, 2.0, (1.0, 0.0)), rel=1e-13)
    with pytest.raises(ValueError):
        s2_integrand(1.0, 1.0, LAM10)


def test_pair_density_identity():
    """Pair density rebuilt from scaled entries equals the closed form."""
    rng = np.random.default_rng(0)
    for _ in range(25):
        v1, v2 = np.sort(rng.uniform(-3, 3, 2))
        if v2 - v1 < 0.05:
            continue
        lam = (rng.uniform(0.2, 2.0), rng.uniform(0.0, 2.0))
        assert _pair_density_from_entries(v1, v2, lam) == pytest.approx(
            s2_integrand(v1, v2, lam), rel=1e-12)


def test_s2_symmetry_and_midpoint_limit():
    v, _ = s2((0, 1), (2, 3), LAM10, 1e-10)
    vt, _ = s2((2, 3), (0, 1), LAM10, 1e-10)
    assert v == pytest.approx(vt, rel=1e-12)
    val, _ = s2((0.0, 0.01), (1.0, 1.01), LAM10, 1e-12)
    approx = 0.01 * 0.01 * s2_integrand(0.005, 1.005, LAM10)
    assert val == pytest.approx(approx, rel=1e-3)


def test_s2_interval_validation():
    with pytest.raises(ValueError):
        s2((0, 1), (0.5, 1.5), LAM10)
    with pytest.raises(ValueError):
        s2((0, 1), (1, 2), LAM10)      # touching: divergent kernel
    with pytest.raises(ValueError):
        s2((1, 1), (2, 3), LAM10)


def test_s2_against_monte_carlo_oracle():
    """Independent Monte Carlo quadrature of the same double integral."""
    val, _ = s2((0, 1), (2, 3), LAM10, 1e-10)
    rng = np.random.default_rng(12345)
    n = 400_000
    u = rng.uniform(0.0, 1.0, n)
    v = rng.uniform(2.0, 3.0, n)
    samples = s2_integrand(u, v, LAM10)
    mc = float(samples.mean())
    sigma = float(samples.std(ddof=1) / math.sqrt(n))
    assert abs(mc - val) < 3 * sigma + 1e-6


def test_four_point_density_symmetry():
    xs = (0.0, 0.7, 1.9, 3.1)
    lam = (0.9, 0.3)
    base = four_point_density(*xs, lam)
    assert four_point_density(xs[2], xs[0], xs[3], xs[1], lam) == pytest.approx(
        base, rel=1e-10)
    with pytest.raises(ValueError):
        four_point_density(0.0, 0.0, 1.0, 2.0, lam)


def test_connected_part_vanishes_with_lambda():
    xs = (0.0, 1.0, 2.0, 3.0)

    def connected(lam_norm):
        lam = (lam_norm, 0.0)
        fp = four_point_density(*xs, lam)
        wick = (s2_integrand(xs[0], xs[1], lam) * s2_integrand(xs[2], xs[3], lam)
                + s2_integrand(xs[0], xs[2], lam) * s2_integrand(xs[1], xs[3], lam)
                + s2_integrand(xs[0], xs[3], lam) * s2_integrand(xs[1], xs[2], lam))
        return abs(fp - wick)

    assert connected(0.5) > connected(0.05) > 0


def test_keystone_wick_identity():
    """four_point_density - Wick sum = 3^4 f_connected (two code paths)."""
    rng = np.random.default_rng(11)
    done = 0
    while done < 10:
        xs = np.sort(rng.uniform(-2, 2, 4))
        if np.min(np.diff(xs)) < 0.08:
            continue
        lam = (rng.uniform(0.2, 1.5), rng.uniform(0.0, 1.5))
        fp = four_point_density(*xs, lam)
        wick = (s2_integrand(xs[0], xs[1], lam) * s2_integrand(xs[2], xs[3], lam)
                + s2_integrand(xs[0], xs[2], lam) * s2_integrand(xs[1], xs[3], lam)
                + s2_integrand(xs[0], xs[3], lam) * s2_integrand(xs[1], xs[2], lam))
        y1, y2, y3 = np.diff(xs)
        assert fp - wick == pytest.approx(
            WICK_HEIGHT_FACTOR * f_connected(y1, y2, y3, lam), abs=1e-10)
        done += 1


def test_f_connected_reflection_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(100):
        y1, y2, y3 = rng.uniform(0.05, 3.0, 3)
        lam = (rng.uniform(0.2, 2.0), 0.0)
        assert f_connected(y1, y2, y3, lam) == pytest.approx(
            f_connected(y3, y2, y1, lam), rel=1e-12)


def test_f_connected_lambda_norm_only():
    rng = np.random.default_rng(6)
    for _ in range(20):
        a, b = rng.uniform(0.1, 2.0, 2)
        y = rng.uniform(0.1, 2.0, 3)
        assert abs(f_connected(*y, (a, b))
                   - f_connected(*y, (math.hypot(a, b), 0.0))) < 1e-13


# Frozen after the determinant-path recomputation (the keystone identity)
# agreed with the transcription to 1e-12 at this point.
F_AT_111_LAM1 = 1.4339696649903942e-04


def test_f_connected_frozen_value():
    val = f_connected(1.0, 1.0, 1.0, LAM10)
    assert val == pytest.approx(F_AT_111_LAM1, rel=1e-12)
    # re-derive from the determinant path at matching positions
    xs = (0.0, 1.0, 2.0, 3.0)
    fp = four_point_density(*xs, LAM10)
    wick = (s2_integrand(0, 1, LAM10) * s2_integrand(2, 3, LAM10)
            + s2_integrand(0, 2, LAM10) * s2_integrand(1, 3, LAM10)
            + s2_integrand(0, 3, LAM10) * s2_integrand(1, 2, LAM10))
    assert (fp - wick) / WICK_HEIGHT_FACTOR == pytest.approx(val, abs=1e-12)


def test_f_connected_validation():
    with pytest.raises(ValueError):
        f_connected(0.0, 1.0, 1.0, LAM10)
    with pytest.raises(ValueError):
        f_connected(1.0, -0.5, 1.0, LAM10)


def test_f_connected_decay():
    vals = [abs(f_connected(1.0, 1.0, 1.0, (m, 0.0)))
            for m in (1e-1, 1e-2, 1e-3)]
    assert vals[0] > vals[1] > vals[2]
    slope = math.log(vals[0] / vals[2]) / math.log(100.0)
    assert 1.5 <= slope <= 2.5


def test_correlation_spec_validation():
    with pytest.raises(ValueError):
        CorrelationSpec(((0, 1), (0.5, 2), (3, 4), (5, 6)), 1.0, 0.0)
    with pytest.raises(ValueError):
        CorrelationSpec(((0, 1), (1, 2), (3, 4), (5, 6)), 1.0, 0.0)
    with pytest.raises(ValueError):
        CorrelationSpec(((0, 0), (1, 2), (3, 4), (5, 6)), 1.0, 0.0)
    with pytest.raises(ValueError):
        CorrelationSpec(((0, 1), (2, 3), (4, 5), (6, 7)), 1.0, 0.0, tol=-1)


def test_wick_defect_far_intervals():
    spec = CorrelationSpec(((0, 1), (20, 21), (40, 41), (60, 61)), 1.0, 0.0,
                           tol=1e-8)
    rep = wick_defect(spec)
    assert abs(rep.defect) < 1e-30
    assert rep.s4 == pytest.approx(rep.wick_sum, rel=1e-10)


def test_wick_defect_pinched_configuration():
    """Pinched intervals at 0, 1, 2, 3 (orientation of the fourth repaired
    to (3 - 2^-n, 3)): strictly positive certified defect."""
    h = 2.0 ** -4
    spec = CorrelationSpec(((0, h), (1 - h, 1), (2, 2 + h), (3 - h, 3)),
                           1.0, 0.0, tol=1e-10)
    rep = wick_defect(spec)
    assert rep.defect > 0
    assert rep.certified
    assert rep.defect > 3 * rep.error_estimate


def test_wick_defect_error_halves_under_refinement():
    # nearly touching intervals keep the refinement error measurable
    iv = ((0, 1), (1.005, 2), (2.01, 3), (3.02, 4))
    vals = [_connected_tensor_integral(iv, LAM10, order)
            for order in (3, 4, 6, 8)]
    err_coarse = abs(vals[1] - vals[0])
    err_fine = abs(vals[3] - vals[2])
    assert err_fine <= max(err_coarse / 2, 1e-14)


def test_s2_error_halves_under_refinement():
    from dimergas.correlations import _panel_nodes

    def estimate(order):
        xi, wi = _panel_nodes(0.0, 1.0, order)
        xj, wj = _panel_nodes(1.002, 2.0, order)
        return float(wi @ s2_integrand(xi[:, None], xj[None, :], LAM10) @ wj)

    vals = [estimate(order) for order in (2, 3, 4, 6)]
    err_coarse = abs(vals[1] - vals[0])
    err_fine = abs(vals[3] - vals[2])
    assert err_fine <= max(err_coarse / 2, 1e-14)
    v1, e1 = s2((0, 1), (1.002, 2), LAM10, 1e-10)
    assert e1 <= 1e-10


def test_translation_invariance():
    lam = (0.9, 0.4)
    xs = (0.0, 0.8, 2.1, 3.3)
    shift = 5.7
    assert four_point_density(*(x + shift for x in xs), lam) == pytest.approx(
        four_point_density(*xs, lam), rel=1e-11)
    assert s2_integrand(0.3 + shift, 1.9 + shift, lam) == pytest.approx(
        s2_integrand(0.3, 1.9, lam), rel=1e-13)


def test_positivity_bounds():
    lo, hi = positivity_bounds(1.0, 24, LAM10)
    assert lo > 0 and hi > 0
    assert lo > hi                      # the certificate gap
    pos, neg = f_connected_positive_negative(1.0, 1.0, 1.0, LAM10)
    assert pos > 0 and neg > 0
    assert pos - neg == pytest.approx(f_connected(1.0, 1.0, 1.0, LAM10),
                                      rel=1e-12)
    # shrinking the outer gaps increases every factor of the negative group
    _, neg_shrunk = f_connected_positive_negative(0.8, 1.0, 0.8, LAM10)
    assert neg_shrunk > neg
    with pytest.raises(ValueError):
        positivity_bounds(-1.0, 24, LAM10)
    with pytest.raises(ValueError):
        positivity_bounds(1.0, 1, LAM10)
