import io
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracwest.cq import (
    CqScheme,
    bdf2_delta,
    convolve,
    correction_weights,
    cq_weights,
    positivity_form,
    write_weights_csv,
)
from fracwest.kernels import KernelSpec, beta_hat, beta_integral

A0 = KernelSpec("A", 0.5)


def test_bdf2_delta():
    assert bdf2_delta(1.0) == 0.0
    assert bdf2_delta(0.0) == 1.5
    assert bdf2_delta(-1.0) == 4.0


def test_first_weights():
    w = cq_weights(A0, 0.1, 1)
    assert w[0] == pytest.approx(math.sqrt(0.1 * 2 / 3), rel=1e-14)
    assert w[0] == pytest.approx(beta_hat(A0, 15.0), rel=1e-14)
    assert w[1] == pytest.approx(w[0] * 0.5 * 4 / 3, rel=1e-14)


def test_weights_match_series_oracle():
    # Taylor coefficients of beta_hat(delta(zeta)/dt) by mpmath differentiation
    spec, dt = KernelSpec("A", 0.3, 1.5), 0.2
    mp.mp.dps = 40
    f = lambda z: (((1 - z) + (1 - z) ** 2 / 2) / dt + spec.r) ** (-spec.mu)
    ref = [float(c) for c in mp.taylor(f, 0, 8)]
    np.testing.assert_allclose(cq_weights(spec, dt, 8), ref, rtol=0, atol=1e-9)


def test_exact_and_contour_paths_agree():
    spec = KernelSpec("A", 0.25)
    e = cq_weights(spec, 0.05, 64, method="exact")
    c = cq_weights(spec, 0.05, 64, method="contour")
    np.testing.assert_allclose(c, e, rtol=0, atol=1e-9)


def test_exact_path_rejects_other_kernels():
    with pytest.raises(ValueError):
        cq_weights(KernelSpec("B", 0.5), 0.1, 4, method="exact")


@pytest.mark.parametrize("mu", [0.25, 0.5, 0.75])
def test_power_law_weights_positive_and_scale(mu):
    spec = KernelSpec("A", mu)
    w1 = cq_weights(spec, 1.0, 256)
    assert np.all(w1 > 0)
    dt = 0.037
    np.testing.assert_allclose(cq_weights(spec, dt, 256), dt**mu * w1, rtol=1e-12)


@pytest.mark.parametrize("spec", [KernelSpec("A", 0.5, 2.0), KernelSpec("B", 0.5)], ids=str)
def test_first_weight_asymptotics(spec):
    ratios = [cq_weights(spec, dt, 0)[0] / ((2 / 3) * dt) ** spec.mu for dt in (1e-2, 1e-3, 1e-4)]
    gaps = [abs(r - 1) for r in ratios]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2


def test_corrections():
    spec = KernelSpec("A", 0.5)
    s = CqScheme.build(spec, 0.1, 16)
    assert s.corrections[0] == pytest.approx(-s.weights[0])
    assert s.corrections[1] == pytest.approx(-0.0735066596813810, rel=1e-12)
    np.testing.assert_allclose(
        s.corrections, correction_weights(spec, 0.1, 16, s.weights), rtol=0, atol=0
    )


def test_scheme_is_read_only():
    s = CqScheme.build(A0, 0.1, 4)
    with pytest.raises(ValueError):
        s.weights[0] = 1.0
    np.testing.assert_allclose(s.times(), [0, 0.1, 0.2, 0.3, 0.4])


@pytest.mark.parametrize("spec", [KernelSpec("A", 0.5), KernelSpec("A", 0.25, 2.0), KernelSpec("B", 0.75)], ids=str)
def test_corrected_rule_exact_on_constants(spec):
    s = CqScheme.build(spec, 0.05, 64, corrected=True)
    ones = np.ones(65)
    for n in (1, 7, 64):
        assert convolve(s, ones, n) == pytest.approx(beta_integral(spec, n * 0.05), rel=1e-12)


def test_convolve_zero_and_errors():
    s = CqScheme.build(A0, 0.1, 8)
    np.testing.assert_array_equal(convolve(s, np.zeros((9, 3)), 8), np.zeros(3))
    with pytest.raises(IndexError):
        convolve(s, np.zeros(9), 9)
    with pytest.raises(IndexError):
        convolve(s, np.zeros(3), 5)


@settings(max_examples=40, deadline=None)
@given(
    alpha=st.floats(-10, 10),
    seed=st.integers(0, 2**31),
    corrected=st.booleans(),
)
def test_convolve_linear(alpha, seed, corrected):
    rng = np.random.default_rng(seed)
    s = CqScheme.build(KernelSpec("B", 0.4), 0.1, 20, corrected=corrected)
    v, w = rng.standard_normal((2, 21, 3))
    lhs = convolve(s, alpha * v + w, 20)
    rhs = alpha * convolve(s, v, 20) + convolve(s, w, 20)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + abs(alpha)))


def test_corrected_equals_plain_for_zero_start():
    s = CqScheme.build(A0, 0.1, 10, corrected=True)
    v = np.linspace(0, 1, 11)
    assert convolve(s, v, 10) == pytest.approx(convolve(s, v, 10, corrected=False), abs=1e-15)


def test_monomial_rate_linear():
    # v = t: order min(alpha + 1, 2) = 2
    spec = A0
    exact = math.gamma(2) / math.gamma(2 + spec.mu)
    errs = []
    for N in (32, 64, 128, 256):
        s = CqScheme.build(spec, 1.0 / N, N)
        errs.append(abs(convolve(s, np.linspace(0, 1, N + 1), N) - exact))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert abs(rates[-1] - 2) < 0.15


def test_positivity_form_zero_and_family_b():
    s = CqScheme.build(KernelSpec("B", 0.5), 0.1, 63)
    assert positivity_form(s, np.zeros(64)) == (0.0, 0.0)
    rng = np.random.default_rng(1)
    for _ in range(20):
        lhs, rhs = positivity_form(s, rng.standard_normal(64))
        assert lhs >= rhs


def test_positivity_form_with_mass_matrix():
    s = CqScheme.build(KernelSpec("A", 0.5, 1.0), 0.1, 15)
    M = np.diag([1.0, 2.0, 3.0])
    v = np.random.default_rng(0).standard_normal((16, 3))
    lhs, _ = positivity_form(s, v, rho=0.9, inner=M)
    assert lhs >= 0
    with pytest.raises(ValueError):
        positivity_form(s, v, rho=1.5)


def test_weights_csv_round_trip():
    s = CqScheme.build(KernelSpec("B", 0.5), 0.1, 8)
    buf = io.StringIO()
    write_weights_csv(s, buf)
    data = np.loadtxt(io.StringIO(buf.getvalue()), delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], s.weights)
    np.testing.assert_array_equal(data[:, 2], s.corrections)
