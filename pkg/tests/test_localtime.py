import math

import numpy as np
import pytest
from scipy.linalg import expm

from reflected_mmbm import (
    MmbmModel,
    ModelError,
    StripSpec,
    brownian_busy_transform,
    brownian_exponent,
    brownian_overflow_process,
    brownian_williams_transform,
    busy_period_transform,
    localtime_transform,
    overflow_rates,
    overflow_rates_limit,
    passage_pairs,
    random_model,
)
from reflected_mmbm.localtime import admissible_interval
from reflected_mmbm.simulate import SimConfig, estimate_epoch, estimate_overflow

from conftest import random_models


def _interval(m, q):
    lo, hi = admissible_interval(m, q)
    lo = lo if np.isfinite(lo) else hi - 4.0
    hi = hi if np.isfinite(hi) else lo + 4.0
    return lo, hi


SCALAR_GRID = [(mu, B, q) for mu in (-1.5, 0.0, 0.3, 2.0) for B in (0.5, 3.0) for q in (0.0, 0.5)
               if not (mu == 0 and q == 0)]  # q = 0 with zero drift is excluded


@pytest.mark.parametrize("mu,B,q", SCALAR_GRID)
def test_scalar_closed_forms(mu, B, q):
    m = MmbmModel([[0.0]], [mu], [1.0])
    lo, hi = _interval(m, q)
    for f in np.linspace(0.05, 0.95, 7):
        a = lo + f * (hi - lo)
        t0 = localtime_transform(m, B, 0.0, q, a)
        tB = localtime_transform(m, B, B, q, a)
        assert t0.FL[0, 0] == pytest.approx(brownian_exponent(mu, B, q, a), rel=1e-12, abs=1e-12)
        assert tB.initL[0, 0] == pytest.approx(brownian_busy_transform(mu, B, q, a), rel=1e-12)
        assert t0.initU[0, 0] == pytest.approx(brownian_williams_transform(mu, B, q, a), rel=1e-12)
        assert busy_period_transform(m, B, q, a)[0, 0] == pytest.approx(tB.initL[0, 0], rel=1e-12)


def test_driftless_limits():
    B, a = 2.0, -0.3
    assert brownian_busy_transform(0.0, B, 0.0, a) == pytest.approx(1 / (1 - a * B))
    assert brownian_williams_transform(0.0, B, 0.0, a) == pytest.approx(1 / (1 + a * B))
    assert brownian_exponent(0.0, B, 0.0, a) == pytest.approx(brownian_exponent(1e-7, B, 0.0, a), rel=1e-6)
    assert brownian_williams_transform(1e-7, B, 0.0, a) == pytest.approx(1 / (1 + a * B), rel=1e-6)


def test_multi_state_williams_form():
    for seed in range(8):
        m = random_model(300 + seed, 3)
        B, q = 1.2, 0.4
        up, down = passage_pairs(m, q)
        Lp, Lm = up.Lambda, down.Lambda
        I = np.eye(3)
        for a in np.linspace(*_interval(m, q), 6)[1:-1]:
            FL = localtime_transform(m, B, 0.0, q, a, pairs=(up, down)).FL
            ref = (expm(-B * Lm) - expm(B * Lp)) @ np.linalg.inv(
                np.linalg.solve(Lm - a * I, expm(-B * Lm)) + np.linalg.solve(Lp + a * I, expm(B * Lp)))
            np.testing.assert_allclose(FL, ref, atol=1e-9)
            np.testing.assert_allclose(busy_period_transform(m, B, q, a, pairs=(up, down)),
                                       busy_period_transform(m, B, q, a, pairs=(up, down), closed_form=False),
                                       atol=1e-10)


def test_transform_structure(mixed):
    for m in [mixed] + random_models(41, 12, zero_variance=0.35, frozen=0.3):
        for q in (0.0, 0.8):
            if q == 0 and m.is_zero_drift:
                continue
            lo, hi = _interval(m, q)
            for a in np.linspace(lo, hi, 9)[1:-1]:
                t = localtime_transform(m, 1.1, 0.4, q, a)
                assert t.residual <= 1e-9
                assert t.kL < 0 and t.kU < 0
                np.testing.assert_allclose(t.initL, t.ML @ t.FL, atol=1e-14)
                t0 = localtime_transform(m, 1.1, 0.0, q, a)
                np.testing.assert_allclose(t0.ML[m.phases.e_minus] @ t0.FL, np.eye(m.phases.n_minus), atol=1e-9)
                E = lambda x: expm(t.FL * x)
                np.testing.assert_allclose(E(0.7), E(0.3) @ E(0.4), atol=1e-10)


def test_alpha_and_drift_preconditions(three):
    lo, hi = admissible_interval(three, 0.5)
    with pytest.raises(ModelError):
        localtime_transform(three, 1.0, 0.0, 0.5, hi + 0.1)
    with pytest.raises(ModelError):
        localtime_transform(three, 1.0, 0.0, 0.5, lo)
    zd = MmbmModel([[-1.0, 1.0], [1.0, -1.0]], [1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ModelError):
        localtime_transform(zd, 1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ModelError):
        overflow_rates(zd, 1.0)
    with pytest.raises(ModelError):
        overflow_rates(MmbmModel([[0.0]], [0.0], [1.0]), 1.0)
    with pytest.raises(ModelError):
        busy_period_transform(MmbmModel([[-1, 1], [1, -1]], [1.0, -2.0], [0.0, 1.0]), 1.0, 0.5, 0.0, closed_form=True)


@pytest.mark.parametrize("mu", [-1.0, 0.4, 2.0])
def test_scalar_overflow(mu):
    B = 1.3
    r = overflow_rates(MmbmModel([[0.0]], [mu], [1.0]), B)
    e = math.exp(2 * mu * B)
    assert r.kappaL == pytest.approx(mu / (e - 1), rel=1e-12)
    assert r.kappaU == pytest.approx(mu * e / (e - 1), rel=1e-12)
    rate, size = brownian_overflow_process(mu, B)
    assert r.kappaU / r.kappaL == pytest.approx(rate / size, rel=1e-12)


def test_overflow_balance_and_limit(mixed):
    for m in [mixed] + random_models(42, 10, zero_variance=0.35, frozen=0.3):
        if m.is_zero_drift:
            continue
        r = overflow_rates(m, 0.9)
        assert r.unused.min(initial=0) >= -1e-12 and r.overflow.min(initial=0) >= -1e-12
        assert r.kappaU - r.kappaL == pytest.approx(m.kappa, abs=1e-9)
        for idx, piv in ((r.e_minus, r.piL), (r.e_plus, r.piU)):
            assert piv.sum() == pytest.approx(1.0 if idx.size else 0.0)
        L, U = overflow_rates_limit(m, 0.9)
        np.testing.assert_allclose(L, np.broadcast_to(r.unused, L.shape), atol=1e-4)
        np.testing.assert_allclose(U, np.broadcast_to(r.overflow, U.shape), atol=1e-4)


def test_small_q_convergence_is_monotone(three):
    r = overflow_rates(three, 1.0)
    errs = [np.abs(overflow_rates_limit(three, 1.0, q)[0] - r.unused).max() for q in (1e-4, 1e-5, 1e-6)]
    assert errs[0] > errs[1] > errs[2]


def test_brownian_overflow_process():
    assert brownian_overflow_process(0.0, 2.0) == (0.5, 0.5)
    r, s = brownian_overflow_process(1.0, 1.0)
    assert r == pytest.approx(2 / (1 - math.exp(-2)))
    assert s == pytest.approx(2 / (math.exp(2) - 1))
    assert r == pytest.approx(1 / math.tanh(1) + 1)
    assert min(brownian_overflow_process(-0.7, 1.5)) > 0
    with pytest.raises(ModelError):
        brownian_overflow_process(1.0, 0.0)


@pytest.mark.parametrize("mu", [-0.6, 0.8])
def test_compound_poisson_exponent(mu):
    B = 1.2
    m = MmbmModel([[0.0]], [mu], [1.0])
    rate, size = brownian_overflow_process(mu, B)
    lo, hi = admissible_interval(m, 0.0)
    for a in np.linspace(lo, min(hi, size), 8)[1:-1]:
        FL = localtime_transform(m, B, 0.0, 0.0, a).FL[0, 0]
        assert rate * (size / (size - a) - 1) == pytest.approx(FL + a, rel=1e-10, abs=1e-12)


def test_mean_local_time_vs_monte_carlo(three):
    B, q = 1.0, 1.0
    t = localtime_transform(three, B, 0.0, q, 0.0)
    ref = -t.ML.sum(axis=1)
    samp = estimate_epoch(three, StripSpec(B), q, SimConfig(replications=20_000, seed=44))
    for i in range(3):
        L = samp.L[samp.j0 == i]
        assert abs(L.mean() - ref[i]) <= 3 * L.std(ddof=1) / math.sqrt(L.size)


def test_fluid_overflow_vs_monte_carlo(fluid2):
    B = 1.0
    r = overflow_rates(fluid2, B)
    e = estimate_overflow(fluid2, StripSpec(B), SimConfig(dt=1e-2, horizon=5e4, seed=45))
    assert np.all(np.abs(e.overflow[r.e_plus] - r.overflow) <= 3 * e.overflow_se[r.e_plus])
    assert np.all(np.abs(e.unused[r.e_minus] - r.unused) <= 3 * e.unused_se[r.e_minus])
