import cmath
import math

import mpmath
import numpy as np
import pytest

from krick import simulate, spectral
from krick.model import ModelParams, build_model


@pytest.fixture(scope="module")
def model():
    return build_model(ModelParams(p=1.5))


@pytest.fixture(scope="module")
def ev(model):
    return spectral.SpectralEvaluator(model)


@pytest.fixture(scope="module")
def taus(model):
    return simulate.excursion_sample(model, 100000, seed=21)["tau"]


def _lam_oracle(s, th, p=1.5, dps=30):
    mpmath.mp.dps = dps
    s = mpmath.mpc(s)
    xi = mpmath.sqrt(2) - 1

    def H(z):
        return (1 + (1 - 1 / z) * mpmath.polylog(p, z)) / 2

    zp = mpmath.exp(-s + 1j * mpmath.mpf(th))
    zm = mpmath.exp(-1j * mpmath.mpf(th))
    return complex(mpmath.exp(-s * xi) * H(zp) + mpmath.exp(-s) * H(zm))


def test_lambda_against_mpmath(ev):
    for s, th in [(0.3 + 0.2j, 0.7), (0.01 - 0.5j, 1e-3), (1e-3, 2.5),
                  (1.0 - 1.0j, -2.0), (-0.02j, 1e-4)]:
        got = complex(ev.lambda_hat(np.array([complex(s)]), th)[0])
        want = _lam_oracle(s, th)
        assert abs(got - want) < 1e-13


def test_lambda_fixed_point(ev):
    assert complex(ev.lambda_hat(np.array([0j]), 0.0)[0]) == 1.0 + 0.0j


def test_lambda_damping_bound(ev, model):
    # lam(u, 0) = E[e^{-u r}] in (0, 1), below e^{-u} since inf r = 1
    for u in (0.1, 1.0, 3.0):
        v = complex(ev.lambda_hat(np.array([u + 0j]), 0.0)[0])
        assert 0 < v.real < math.exp(-u) and abs(v.imag) < 1e-15


def test_conjugate_symmetry(ev):
    s = np.array([0.2 - 0.7j, 0.05 + 0.3j, 1.0 - 2.0j])
    th = 0.9
    a = ev.lambda_hat(np.conj(s), -th)
    b = np.conj(ev.lambda_hat(s, th))
    assert np.max(np.abs(a - b)) < 1e-14


def test_modulus_dominated_by_real_axis(ev):
    u = 0.05
    lam0 = abs(complex(ev.lambda_hat(np.array([u + 0j]), 0.0)[0]))
    bs = np.linspace(-3, 3, 11)
    ths = np.linspace(-math.pi, math.pi, 13, endpoint=False)
    lam = ev.lambda_hat(u - 1j * bs[:, None], ths[None, :])
    assert np.max(np.abs(lam)) <= lam0 + 1e-12


def test_series_route_certified(ev):
    val, bound = ev.lambda_hat_series(0.05 - 0.3j, 0.7, tol=1e-10,
                                      return_bound=True)
    closed = complex(ev.lambda_hat(np.array([0.05 - 0.3j]), 0.7)[0])
    assert bound <= 1e-10
    assert abs(val - closed) <= 5 * bound + 1e-13
    with pytest.raises(ValueError):
        ev.lambda_hat_series(0.0, 1e-9, tol=1e-14, max_terms=100000)


def test_derivative_two_routes(ev):
    # exact r-weighted series vs central differences, 1e-6 relative
    s = 0.05 - 0.2j
    th = 0.4
    exact = complex(ev.dlambda_db(np.array([s]), th)[0])
    h = 1e-6
    fd = (complex(ev.lambda_hat(np.array([s - 1j * h]), th)[0])
          - complex(ev.lambda_hat(np.array([s + 1j * h]), th)[0])) / (2 * h)
    assert abs(fd - exact) / abs(exact) < 1e-6


def test_dlambda_at_origin_is_i_r_star(ev, model):
    v = complex(ev.dlambda_db(np.array([0j]), 0.0)[0])
    assert abs(v - 1j * model.constants.r_star) < 1e-12


def test_second_derivative_stencil(ev):
    s = 0.3 - 0.1j
    exact = complex(ev.d2lambda_db2(np.array([s]), 0.2)[0])
    h = 1e-4
    sten = (complex(ev.lambda_hat(np.array([s - 1j * h]), 0.2)[0])
            - 2 * complex(ev.lambda_hat(np.array([s]), 0.2)[0])
            + complex(ev.lambda_hat(np.array([s + 1j * h]), 0.2)[0])) / h ** 2
    assert abs(sten - exact) / abs(exact) < 1e-6
    with pytest.raises(ValueError):
        ev.d2lambda_db2(np.array([-0.1 + 0j]), 0.0)


def test_S_identity_against_mc(ev, taus):
    for s in (0.05 + 0j, 0.3 - 0.5j, 0.02 + 0.9j, 1.0 - 0.1j):
        mc, se = spectral.laplace_mc(taus, s)
        sp, err = ev.laplace_tau(np.array([complex(s)]))
        assert abs(mc - sp[0]) < 4 * se + 1e-6


def test_S_excludes_origin(ev):
    with pytest.raises(ValueError):
        ev.S(0.0)


def test_A_routes_agree(ev, taus):
    for s in (0.05 + 0j, 0.01 - 0.1j):
        Aq, _ = ev.A(np.array([complex(s)]))
        Af = ev.A_fd(s)
        assert abs(Aq[0] - Af) / abs(Af) < 1e-5
        Am, se = spectral.a_mc(taus, s)
        assert abs(Aq[0] - Am) < 4 * se
    # A(u) real positive on the real axis, bounded by E[tau e^{-2u}]... loose
    Au, _ = ev.A(np.array([0.2 + 0j]))
    assert Au[0].real > 0 and abs(Au[0].imag) < 1e-10
    with pytest.raises(ValueError):
        spectral.a_mc(taus, -0.1)


def test_a_of_s_routes(model, ev, taus):
    sp, mc, tol = spectral.A_of_s(model, ev, 0.01 - 0.1j, "both", taus=taus)
    assert abs(sp - mc) <= tol
    # at stronger damping the sample variance is small enough for a tight
    # cross-route band (percent-level agreement)
    sp2, mc2, _ = spectral.A_of_s(model, ev, 0.05 - 0.1j, "both", taus=taus)
    assert abs(sp2 - mc2) / abs(sp2) < 0.02
    with pytest.raises(ValueError):
        spectral.A_of_s(model, ev, 0.1, "mc")


def test_constants_report(model):
    rep = spectral.compute_constants(model)
    assert abs(rep.K_p - rep.K_p_quad) < 1e-8
    assert abs(rep.J - rep.J_quad) < 1e-7
    assert abs(rep.K_p_prime - rep.K_p_prime_quad) < 1e-8
    assert rep.c_p > 0 and rep.K_p > 0 and rep.K_p_prime > 0
    assert abs(rep.K_p_prime - rep.beta * rep.K_p) < 1e-12
    # closed-form identity: d_p = (d_0/pi) J = beta * tail-target * conversion
    conv = model.constants.ell_star(1e9) / model.constants.ell_star_tail(1e9)
    want = rep.beta * rep.return_tail_target * conv
    assert abs(rep.d_p_exact - want) < 1e-6
    assert abs(cmath.phase(rep.C_p_exact) - math.pi / 3) < 1e-12
    assert abs(abs(rep.C_p_freq)
               - 0.5 * math.sin(2 * math.pi / 3)
               * model.constants.r_star ** (1 / 3)) < 1e-12
    tags = [c["tag"] for c in rep.d_p_candidates]
    assert len(tags) == len(set(tags)) == 9


def test_expansion_fit(model, ev):
    fit = spectral.verify_eigenvalue_expansion(model, ev)
    assert abs(fit.theta_exponent - 1.5) < 0.02
    assert abs(fit.coeff_two_term / fit.coeff_target - 1) < 0.02
    assert abs(fit.dlam_db_mag - model.constants.r_star) < 1e-9
    assert fit.dlam_db_value.imag > 0      # direct series sign: +i r*


def test_expansion_fit_p2():
    m = build_model(ModelParams(p=2.0))
    ev2 = spectral.SpectralEvaluator(m)
    fit = spectral.verify_eigenvalue_expansion(
        m, ev2, theta_grid=np.logspace(-5, -3, 15))
    # theta^2 coefficient grows like 4 c_p c_ell ln(1/theta) = ln(1/theta)
    # (two-sided symmetric displacement); confirmed by the continuum moment
    assert abs(fit.coeff_target - 1.0) < 1e-12
    assert abs(fit.p2_log_slope / fit.coeff_target - 1) < 0.05


def test_aperiodicity_scan_and_control(model, ev):
    rep = spectral.aperiodicity_scan(model, ev, n_b=81, n_theta=31)
    assert rep.passed and rep.max_abs < 0.999
    m0 = build_model(ModelParams(p=1.5, xi_tag="zero"),
                     allow_lattice_roof=True)
    rep0 = spectral.aperiodicity_scan(m0, spectral.SpectralEvaluator(m0),
                                      n_b=81, n_theta=31)
    assert not rep0.passed
    assert rep0.max_abs >= 1.0 - 1e-6
    assert abs(rep0.argmax_b - 2 * math.pi) < 1e-9


def test_log_power_family_uses_series():
    m = build_model(ModelParams(p=1.5, ell_kind="log-power", kappa=0.5))
    with pytest.raises(NotImplementedError):
        spectral.SpectralEvaluator(m)
    # the series evaluator still covers the family, with a certified bound
    val, bound = spectral.lambda_hat_series(m, 0.2 - 0.1j, 0.5, tol=1e-9,
                                            return_bound=True)
    assert bound <= 1e-9
    # independent slow oracle
    ns = np.arange(1, 400000, dtype=float)
    pn = 0.5 * m.law.prob_n(ns)
    xi = m.params.xi
    s = 0.2 - 0.1j
    oracle = np.sum(pn * (np.exp(-s * (ns + xi) + 0.5j * ns)
                          + np.exp(-s - 0.5j * ns)))
    assert abs(val - oracle) < 1e-6
