import math

import numpy as np
import pytest

from crossover_tail import crossover
from crossover_tail.crossover import (InfeasibleFit, MuContourSpec, envelope, fit_tail_envelope,
                                      tail_probability, tail_probability_report)
from crossover_tail.operator import KernelAssembler
from oracles import goe_squared_tail, gue_tail


def test_contour_spec_validation():
    c = MuContourSpec().contour()
    assert abs(c.segments[0].start - (40 + 0.5j)) < 1e-15
    assert abs(c.segments[-1].end - (40 - 0.5j)) < 1e-15
    with pytest.raises(ValueError):
        MuContourSpec(delta=0.6, radius=0.5)
    with pytest.raises(ValueError):
        MuContourSpec(truncation=0.4)
    with pytest.raises(ValueError):
        tail_probability(10.0, 8.0, method="other")


def test_zero_kernel_gives_zero_tail(monkeypatch):
    monkeypatch.setattr(KernelAssembler, "matrices",
                        lambda self, mus: np.zeros((np.size(mus), len(self.nodes), len(self.nodes)),
                                                   complex))
    monkeypatch.setattr(KernelAssembler, "profile_trace", lambda self, w, p: 0.0)
    r = tail_probability_report(10.0, 8.0)
    assert r.value == 0.0 and r.imag == 0.0


@pytest.fixture(scope="module")
def t8_s10():
    return tail_probability_report(10.0, 8.0)


def test_tail_real_and_in_range(t8_s10):
    assert 0 < t8_s10.value < 1 and not t8_s10.clipped
    assert abs(t8_s10.imag) <= 1e-6 * t8_s10.value


def test_monotone_in_s(t8_s10):
    a = tail_probability(12.0, 8.0)
    b = tail_probability(14.0, 8.0)
    assert t8_s10.value >= a >= b > 0


def test_split_and_direct_agree():
    split = tail_probability_report(8.0, 8.0)
    direct = tail_probability_report(8.0, 8.0, method="direct")
    assert abs(split.value - direct.value) <= max(1e-8 * split.value, direct.err_estimate)
    # the exact trace term dominates the tail
    assert split.first_order > 0


@pytest.mark.parametrize("mc", [MuContourSpec(delta=0.25), MuContourSpec(truncation=20.0),
                                MuContourSpec(truncation=80.0), MuContourSpec(radius=1.0)])
def test_contour_independence(mc, t8_s10):
    assert abs(tail_probability(10.0, 8.0, mu_contour=mc) - t8_s10.value) < 1e-5 * t8_s10.value


def test_large_T_approaches_critical_spike_law():
    s = 8.0
    lim = goe_squared_tail(s)
    t8 = tail_probability(s, 8.0)
    t64 = tail_probability(s, 64.0)
    assert t8 < t64 < lim * (1 + 1e-9)
    assert abs(t64 / lim - 1) < 1e-6
    assert abs(t8 / lim - 1) < 1e-3
    # the GUE tail is many orders smaller: the large-T reference is not F_GUE
    assert t64 / gue_tail(s) > 1e6


def _synthetic(c1, c2, c3):
    return [(s, T, float(envelope(s, T, c1, c2, c3)))
            for T in (8.0, 64.0) for s in np.arange(8.0, 21.0)]


def test_fit_recovers_synthetic_constants():
    fit = fit_tail_envelope(_synthetic(1.0, 0.5, 0.6))
    assert fit.feasible
    for got, want in ((fit.c1, 1.0), (fit.c2, 0.5), (fit.c3, 0.6)):
        assert abs(got / want - 1) < 0.05
    assert max(fit.residuals) <= 1e-7
    assert fit.rates[64.0] / fit.rates[8.0] == pytest.approx(2.0, rel=0.05)


def test_fit_rejects_bad_samples():
    data = _synthetic(1.0, 0.5, 0.6)
    with pytest.raises(InfeasibleFit):
        fit_tail_envelope([d for d in data if d[1] == 8.0])
    with pytest.raises(InfeasibleFit):
        fit_tail_envelope(data[:5])
    bad = list(data)
    bad[3] = (bad[3][0], bad[3][1], 0.0)
    with pytest.raises(InfeasibleFit) as info:
        fit_tail_envelope(bad)
    assert info.value.sample == bad[3]


def test_convergence_failure_keeps_best():
    with pytest.raises(crossover.TailConvergenceError) as info:
        tail_probability_report(10.0, 8.0, det_tol=1e-300, n=16, n_max=32)
    assert info.value.best.n == 32
    assert math.isfinite(info.value.best.value)
