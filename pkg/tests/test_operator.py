import math

import numpy as np
import pytest

from crossover_tail.crossover import MuContourSpec
from crossover_tail.deformed_airy import DeformedAiryParams, ai_upper_gamma, kappa
from crossover_tail.operator import (KernelAssembler, KernelPoleError, KernelSpec, _mu_factor,
                                     a1_kernel, a2_kernel, composite_gl, hs_norms, kernel_eval,
                                     kernel_eval_quad, mu_factor, mu_factor_envelope, t_window)


def contour_points(m=200):
    u = np.linspace(0, 1, m)
    return np.concatenate([sg.point(u) for sg in MuContourSpec().contour().segments])


def test_mu_factor_examples():
    spec = KernelSpec(2.0, -1.0, 0.0)
    assert complex(mu_factor(0.0, spec)) == pytest.approx(-0.5, abs=1e-15)
    assert abs(complex(mu_factor(-800.0, spec))) == 0.0
    assert complex(mu_factor(50.0, spec)) == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(KernelPoleError):
        _mu_factor(np.array([0.0]), 1.0 + 0j, 1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(8.0, 2.0, 10.0)
    with pytest.raises(ValueError):
        KernelSpec(0.5, -1.0, 10.0)
    assert KernelSpec(8.0, -1.0, 0.0).largeness_threshold == pytest.approx(64 * kappa(1.0) ** -4)


def test_mu_factor_envelope_squared_form_only():
    mus = contour_points()
    sq = [mu_factor_envelope(T, np.linspace(-L, L, 2001), mus, power=2)
          for T in (1.0, 8.0) for L in (10.0, 20.0)]
    assert max(sq) / min(sq) < 1.01           # bounded uniformly
    lin = [mu_factor_envelope(8.0, np.linspace(-L, L, 2001), mus, power=1) for L in (10.0, 20.0)]
    assert lin[1] > 1e3 * lin[0]             # grows like e^{-kappa t}


def test_kernel_real_for_real_mu():
    spec = KernelSpec(8.0, -1.0, 10.0)
    for x, y in [(10.0, 10.0), (11.0, 13.5), (14.0, 10.5)]:
        v = kernel_eval(x, y, spec)
        assert v.imag == 0.0 or abs(v.imag) < 1e-14 * abs(v.real)


def test_kernel_against_dense_rule():
    spec = KernelSpec(2.0, -1.0 + 0.5j, 0.0)
    up, lo = spec.upper(), spec.lower()
    for x, y in [(0.0, 0.0), (1.0, 2.5), (3.0, 0.5)]:
        t_lo, t_hi = t_window(y, spec)
        t, w = composite_gl(t_lo - 5, t_hi + 5, 0.25, 30)
        ref = np.sum(w * mu_factor(t, spec) * up(x + t) * lo(y + t))
        assert abs(kernel_eval(x, y, spec) - ref) < 1e-7 * abs(ref)


def test_truncation_window_doubling():
    spec = KernelSpec(2.0, -1.0, 0.0)
    a = kernel_eval_quad(2.0, 2.0, spec).value
    b = kernel_eval_quad(2.0, 2.0, spec, window_scale=2.0).value
    assert abs(a - b) <= 1e-10 * abs(a)


def test_a1_a2_at_origin():
    spec = KernelSpec(2.0, -1.0, 0.0)
    v = ai_upper_gamma(DeformedAiryParams.from_T(0.0, 2.0)).value
    assert float(a1_kernel(0.0, 0.0, spec)) == pytest.approx(v, rel=1e-11)
    assert complex(a2_kernel(0.0, 1.0, spec)).imag == 0


def test_conjugation_identity():
    rng = np.random.default_rng(7)
    spec = KernelSpec(8.0, -1.0 - 1.0j, 10.0)
    for x, y in rng.uniform(10, 16, size=(10, 2)):
        t_lo, t_hi = t_window(y, spec)
        t, w = composite_gl(t_lo, t_hi, 0.5, 20)
        comp = np.sum(w * a1_kernel(x, t, spec) * a2_kernel(t, y, spec))
        direct = kernel_eval(x, y, spec) * math.sqrt((y ** 4 + 1) / (x ** 4 + 1))
        assert abs(comp - direct) <= 1e-6 * abs(direct)


def test_assembler_matches_pointwise():
    nodes = np.array([10.0, 10.7, 12.0, 15.5])
    A = KernelAssembler(8.0, 10.0, nodes)
    mus = [-1.0, -1 + 1j, 0.3 - 0.5j]
    K = A.matrices(mus)
    for m, mu in enumerate(mus):
        spec = KernelSpec(8.0, mu, 10.0)
        for i, j in [(0, 0), (1, 3), (3, 2)]:
            ref = kernel_eval(nodes[i], nodes[j], spec)
            assert abs(K[m, i, j] - ref) <= 1e-9 * abs(ref) + 1e-300


def test_hs_split_and_shapes():
    rep8 = hs_norms(KernelSpec(8.0, -1.0, 10.0))
    sp, er = rep8.split, rep8.split_error
    assert abs(sp["I1"] - sp["I3"] - sp["I4"]) <= er["I1"] + er["I3"] + er["I4"]
    assert rep8.norm_a2 ** 2 == pytest.approx(sp["I1"] + sp["I2"], rel=1e-14)
    rep64 = hs_norms(KernelSpec(64.0, -1.0, 10.0))
    # ||A1||^2 / (T^{2/3} (int dx/(x^4+1))^2) has a T-independent scale
    c = [r.norm_a1 ** 2 / T ** (2 / 3) for r, T in ((rep8, 8.0), (rep64, 64.0))]
    assert 1 / 3 < c[0] / c[1] < 3
    # I2 carries the e^{-kappa s} factor and is much smaller at larger T
    assert rep64.split["I2"] < 1e-10 * rep8.split["I2"]
