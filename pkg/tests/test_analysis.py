import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import pipeline
from tcnot.analysis import (
    LssaSpec,
    binomial_ci,
    crossing_estimate,
    fit_threshold,
    jackknife_ci,
    lssa,
    run_experiment,
)
from tcnot.config import RunConfig
from tcnot.decoders import decode


def _naive_jackknife(k, n):
    rates = []
    for i in range(len(k)):
        rates.append((sum(k) - k[i]) / (sum(n) - n[i]))
    m = sum(rates) / len(rates)
    var = (len(k) - 1) / len(k) * sum((r - m) ** 2 for r in rates)
    return sum(k) / sum(n), math.sqrt(var)


@given(st.lists(st.integers(0, 50), min_size=2, max_size=30), st.integers(50, 200))
def test_jackknife_matches_naive(k, size):
    rate, lo, hi = jackknife_ci(k, [size] * len(k))
    r2, s2 = _naive_jackknife(k, [size] * len(k))
    assert math.isclose(rate, r2)
    assert math.isclose(hi, min(1.0, r2 + 1.96 * s2), abs_tol=1e-12)
    assert math.isclose(lo, max(0.0, r2 - 1.96 * s2), abs_tol=1e-12)


def test_jackknife_close_to_binomial_for_iid_blocks():
    rng = np.random.default_rng(0)
    n, p = 100_000, 0.03
    fails = rng.random(n) < p
    blocks = fails.reshape(100, -1).sum(axis=1)
    r, lo, hi = jackknife_ci(blocks, [1000] * 100)
    br, blo, bhi = binomial_ci(int(fails.sum()), n)
    assert math.isclose(r, br)
    assert 0.7 < (hi - lo) / (bhi - blo) < 1.3
    with pytest.raises(ValueError):
        jackknife_ci([3])


def _synthetic(p_t=0.01, nu=1.0, ds=(3, 5, 7), ps=None, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    ps = ps or [0.008, 0.009, 0.0095, 0.01, 0.0105, 0.011, 0.012]
    out = []
    for d in ds:
        for p in ps:
            x = (p - p_t) * d ** (1 / nu)
            y = 0.1 + 8.0 * x + 40.0 * x * x
            s = 0.002
            out.append((d, p, y + noise * s * rng.standard_normal(), s))
    return out


def test_fit_recovers_known_threshold():
    for seed in range(5):
        fit = fit_threshold(_synthetic(noise=1.0, seed=seed))
        assert fit.success
        assert abs(fit.p_t - 0.01) < 2 * fit.p_t_err + 1e-5
        assert abs(fit.nu - 1.0) < 0.5


def test_fit_exact_data():
    fit = fit_threshold(_synthetic(p_t=0.0123, nu=1.3, ps=[0.010, 0.011, 0.012, 0.0125, 0.013, 0.014]))
    assert fit.success and math.isclose(fit.p_t, 0.0123, rel_tol=1e-4)


def test_fit_fails_without_crossing():
    pts = [(d, p, p * 10 / d, 0.001) for d in (3, 5, 7) for p in (0.005, 0.006, 0.007, 0.008)]
    fit = fit_threshold(pts)
    assert not fit.success and "cross" in fit.message
    assert not fit_threshold([(3, p, p, 0.01) for p in (0.1, 0.2, 0.3, 0.4)]).success
    assert crossing_estimate(pts) is None


@given(st.permutations(list(range(21))))
def test_fit_is_order_invariant(perm):
    pts = _synthetic(noise=1.0, seed=3)
    a = fit_threshold(pts)
    b = fit_threshold([pts[i] for i in perm])
    assert a.success and b.success and math.isclose(a.p_t, b.p_t, rel_tol=1e-9)


def test_lssa_closed_forms():
    assert lssa(LssaSpec("identity")).lssa == 16
    for d in (3, 4, 5, 7, 12):
        for b in (1, 2):
            xx = lssa(LssaSpec("xx_merge", d, b))
            assert xx.lssa == 22 + Fraction(4 * b, d)
            assert xx.ratio == Fraction(11, 8) + Fraction(b, 4 * d)
            ls = lssa(LssaSpec("ls_cnot", d, b))
            assert ls.ratio == Fraction(9, 4) + Fraction(b, 2 * d)
    assert lssa(LssaSpec("tcnot_ordered")).ratio == Fraction(5, 4)
    for n in range(1, 8):
        for d, b in ((3, 1), (5, 2)):
            r = lssa(LssaSpec("ls_cnot_multi", d, b, n)).ratio
            assert r == Fraction(21 + 15 * n + math.ceil(n / 2) * 8 * b * d, 8 * (n + 1))
        t = lssa(LssaSpec("tcnot_multi", 3, 1, n)).ratio
        assert t == ((n + 1) + Fraction(3, 2) * n + 1 + Fraction(n, 2)) / (2 * (n + 1))
    # the multi-target tCNOT form reduces to the single-target amplifier
    assert lssa(LssaSpec("tcnot_multi", 3, 1, 1)).ratio == lssa(LssaSpec("tcnot_ordered")).ratio
    with pytest.raises(ValueError):
        LssaSpec("tcnot_multi", n=0)
    with pytest.raises(ValueError):
        LssaSpec("bogus")


def test_run_experiment_counts_or_failures():
    cfg = RunConfig("tcnot", "ordered", d=3, p=0.015, shots=3000, seed=11)
    stats = run_experiment(cfg, pipeline("tcnot", "ordered", p=0.015))
    pipe = pipeline("tcnot", "ordered", p=0.015)
    fails = []
    for b in pipe.sampler.batches(3000, 11):
        fails.append(decode(pipe.graphs, b).failures)
    f = np.concatenate(fails).astype(bool)
    assert stats.failures_total == int(f.any(axis=1).sum())
    names = [o.name for o in pipe.graphs.dets.observables]
    for i, nm in enumerate(names):
        assert stats.observable_failures[nm] == int(f[:, i].sum())
    assert stats.failures_total <= stats.failures_x + stats.failures_z
    assert stats.ci_low <= stats.p_l <= stats.ci_high
    assert sum(stats.block_failures) == stats.failures_total and len(stats.block_failures) == 100


def test_low_statistics_flag():
    stats = run_experiment(RunConfig("2scqm", d=3, p=0.0, shots=200))
    assert stats.failures_total == 0 and stats.low_statistics
