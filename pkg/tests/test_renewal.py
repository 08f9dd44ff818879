import math

import numpy as np
import pytest

from krick import renewal, simulate, spectral
from krick.model import ModelParams, build_model


@pytest.fixture(scope="module")
def model():
    return build_model(ModelParams(p=1.5))


@pytest.fixture(scope="module")
def ev(model):
    return spectral.SpectralEvaluator(model)


@pytest.fixture(scope="module")
def taus(model):
    return simulate.excursion_sample(model, 80000, seed=31)["tau"]


def test_kernel_pair_values():
    kp = renewal.KernelPair(2.0)
    assert float(kp.ghat(0.0)) == 1.0
    assert abs(float(kp.ghat(2 * math.pi / 2.0))) < 1e-30
    assert float(kp.g(0.0)) == 0.5
    assert float(kp.g(2.0)) == 0.0
    assert float(kp.g(2.1)) == 0.0
    b = np.linspace(1e-6, 1.99, 50)
    assert np.allclose(kp.g_plus(1j * b).real, kp.g(b), atol=1e-15)
    assert np.allclose(kp.g_minus(-1j * b).real, kp.g(b), atol=1e-15)


def test_kernel_fourier_pair():
    for a in (0.5, 1.0, 4.0):
        kp = renewal.KernelPair(a)
        for lam in (0.0, 0.3, 2.0, 2 * a):
            assert kp.fourier_residual(lam) < 1e-6


def test_kernel_integral_identity():
    # int ghat = 2 pi g(0) = 2 pi / a
    for a in (0.5, 1.0, 4.0):
        kp = renewal.KernelPair(a)
        assert kp.fourier_residual(0.0) < 1e-8


def test_lipschitz_extension_bound():
    kp = renewal.KernelPair(1.0)
    # |g±(u+ib) - g±(ib)| = u / a^2 exactly, so the gamma = 0.9 ratio is
    # bounded by u^(1-gamma)/a^2 <= 1/a^2 on u <= 1
    worst = kp.lipschitz_extension_residual(0.9)
    assert worst <= 1.0 / kp.a ** 2 + 1e-12


def test_weighted_measure(taus):
    nu = renewal.WeightedTauMeasure(taus, u=0.05)
    assert nu.total_mass() > 0
    assert nu.v_symmetrized_window(2.0, 3.0) == 0.5 * nu.window(2.0, 3.0)
    with pytest.raises(ValueError):
        renewal.WeightedTauMeasure(taus, u=0.0).total_mass()
    # fourier at b=0 equals the plain mass
    assert abs(nu.fourier(0.0) - nu.total_mass()) < 1e-14


def test_nu0_sandwich_on_windows(model, taus):
    nu0 = renewal.WeightedTauMeasure(taus, u=0.0)
    for t in (10.0, 50.0):
        win = nu0.window(t, t + 1.0)
        mass = float(np.mean((taus >= t) & (taus < t + 1.0)))
        assert t * mass <= win + 1e-12
        assert win <= (t + 1.0) * mass + 1e-12


def test_lemma31_increments(model, taus):
    vals, incs = renewal.WeightedTauMeasure(taus).second_moment_increments(
        (10.0, 1e2, 1e3, 1e4))
    assert np.all(np.abs(incs) < np.array([2e-2, 5e-3, 1e-3]))
    assert abs(incs[-1]) < 1e-3


def test_inversion_identity(model, ev, taus):
    for u, a, t, lam in [(0.1, 1.0, 0.0, 0.0), (0.01, 4.0, 10.0, 0.3)]:
        r = renewal.inversion_check(model, ev, taus, u, a, t, lam)
        assert r.ok, (r.diff, r.budget)


def test_inversion_narrow_kernel_degenerates_to_mass(model, ev, taus):
    # ghat_a -> 1 pointwise as the kernel bandwidth a -> 0 (the frequency
    # triangle tends to a delta), so the lhs approaches the nu_u total mass
    # E[tau e^{-u tau}] = A(u)
    u = 0.2
    kp = renewal.KernelPair(1e-7)
    w = taus * np.exp(-u * taus)
    lhs = np.mean(w * kp.ghat(taus))
    assert abs(lhs - np.mean(w)) < 1e-8 * abs(np.mean(w))
    with pytest.raises(ValueError):
        renewal.inversion_check(model, ev, taus, 0.0, 1.0, 0.0, 0.0)


def test_inversion_u_stability(model, ev, taus):
    # diffs remain within budget as u decreases (dominated-convergence regime)
    diffs = []
    for u in (0.1, 0.01, 1e-3):
        r = renewal.inversion_check(model, ev, taus, u, 1.0, 0.0, 0.0)
        assert r.ok
        diffs.append(r.diff)
    assert diffs[-1] < 10 * (diffs[0] + 1e-4)


def test_tent_hat_closed_form():
    from scipy.integrate import quad
    for s in (0.3, 1.0, 2.5):
        want, _ = quad(lambda t: (1 - abs(t)) * math.exp(-s * t), -1, 1,
                       epsabs=1e-13)
        assert abs(renewal.tent_hat(s) - want) < 1e-12
    assert abs(renewal.tent_hat(1e-9) - 1.0) < 1e-9   # g_0(0) = 1


def test_tent_laplace_identity(model, taus):
    rows = renewal.tent_laplace_check(model, taus, (0.5, 1.0))
    for r in rows:
        assert r.ok, (r.s, r.residual, r.budget)
        assert r.residual < 1e-3


def test_fga_limit_support(model, ev):
    # lam > a: g_a(lam) = 0, target 0, and the value must be comparatively
    # small (kernel support), checked at moderate t
    rows = renewal.fga_limit(model, ev, a=0.5, lam=1.0, t_grid=(20.0,))
    assert rows[0].target == 0.0
    base = renewal.fga_limit(model, ev, a=0.5, lam=0.0, t_grid=(20.0,))
    assert abs(rows[0].value) < 0.2 * abs(base[0].value)


def test_fga_columns(model, ev):
    rows = renewal.fga_limit(model, ev, a=1.0, lam=0.0, t_grid=(10.0, 30.0))
    for r in rows:
        assert abs(r.value - (r.I1 + r.I2)) < 1e-10 * max(1.0, abs(r.value))
        assert r.m_t == pytest.approx(model.constants.m_norm(r.t), rel=1e-12)
    with pytest.raises(ValueError):
        renewal.fga_limit(model, ev, a=1.0, lam=0.0, t_grid=(5.0,))


def test_interval_window_check(model):
    hist = simulate.estimate_tail_histogram(model, 60000, seed=17)
    rows = renewal.interval_window_check(model, hist)
    assert len(rows) == 12
    full = [r for r in rows if r.hi - r.lo == 1.0 and r.t < 200]
    # pre-asymptotic but within a factor two of the interval-length law
    assert 0.3 < full[0].ratio < 1.5
