import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krick.model import (ModelError, ModelParams, NTAB, build_model,
                         c_p_constant, ell_star, return_tail_target)


@pytest.fixture(scope="module")
def model():
    return build_model(ModelParams(p=1.5))


def test_param_validation():
    with pytest.raises(ModelError):
        ModelParams(p=1.0).validate()
    with pytest.raises(ModelError):
        ModelParams(p=2.3).validate()
    with pytest.raises(ModelError):
        ModelParams(p=1.5, xi_tag="zero").validate()
    ModelParams(p=1.5, xi_tag="zero").validate(allow_lattice_roof=True)
    with pytest.raises(ModelError):
        ModelParams(p=1.5, ell_kind="log-power", kappa=1.7).validate()
    ModelParams(p=1.5, ell_kind="log-power", kappa=0.5).validate()


def test_r_star_against_zeta_oracle(model):
    want = 0.5 * (float(mpmath.zeta(1.5)) + math.sqrt(2.0) - 1.0 + 1.0)
    assert abs(model.constants.r_star - want) < 1e-10
    assert abs(model.constants.r_star - 2.013294) < 1e-5


def test_r_star_series_route_log_power():
    m = build_model(ModelParams(p=1.5, ell_kind="log-power", kappa=0.5))
    # oracle: slow direct summation
    ns = np.arange(1, 3_000_000, dtype=float)
    head = np.sum((1 + np.log(ns)) ** 0.5 * ns ** -1.5)
    assert abs(m.constants.sum_T - head) < 5e-3   # head alone misses the tail
    assert m.constants.sum_T > head


def test_tail_phi_values(model):
    law = model.law
    assert float(law.tail_phi(0.0)) == 0.5
    assert abs(float(law.tail_phi(10.0)) - 11.0 ** -1.5 / 2.0) < 1e-16
    # exactness at integers: mu(|phi| > t) = T(floor(t) + 1)
    for t in (1.0, 3.0, 7.99, 100.5):
        assert float(law.tail_abs_phi(t)) == float(law.T(math.floor(t) + 1.0))


def test_roof_tail_comparison_rate(model):
    # mu(r > t) - mu(phi > t - 1) -> 0 at rate t^-(p+1)
    law = model.law
    ts = np.array([10.0, 100.0, 1000.0])
    gap = np.abs(law.tail_r(ts) - law.tail_phi(ts - 1.0))
    assert np.all(gap < 3.0 * ts ** -2.5)


def test_normalization_with_analytic_tail(model):
    law = model.law
    ns = np.arange(1, NTAB + 1, dtype=float)
    total = 2.0 * np.sum(law.prob(1, ns)) + float(law.T(NTAB + 1))
    assert abs(total - 1.0) < 1e-12


def test_monotonicity(model):
    assert np.all(np.diff(model.law.Tvals) < 0)
    assert np.all(model.law.prob_n(np.arange(1, 1000, dtype=float)) > 0)


def test_c_p_value():
    # c_p = 2 Gamma(-1/2) cos(3 pi / 4) = 2 sqrt(2 pi) at p = 3/2
    assert abs(c_p_constant(1.5) - 2.0 * math.sqrt(2.0 * math.pi)) < 1e-12
    assert abs(c_p_constant(1.5) - 5.013) < 1e-3
    assert c_p_constant(2.0) == 0.5


def test_ell_star_constant_family(model):
    c = model.constants
    v = ell_star(c, 1e6)
    assert abs(v - 0.5 ** (2.0 / 3.0)) < 1e-6
    assert abs(c.ell_star_tail(1e6) - (c.c_p * 0.5) ** (-2.0 / 3.0)) < 1e-6
    # reciprocal pairing between the two normalizations
    assert abs(c.ell_star_tail(1e4) * c.ell_star(1e4) * c.c_p ** (2 / 3)
               - 1.0) < 1e-6


def test_ell_star_composition_identity(model):
    # ell*(s) s^(-1/p) inverts ell_p(x) x^-p, checked on a grid
    c = model.constants
    errs = []
    for x in (1e2, 1e3, 1e4, 1e5, 1e6):
        s = float(c.ell_p(x)) * x ** -1.5
        errs.append(abs(c.ell_star(s) * s ** (-1 / 1.5) / x - 1.0))
    assert max(errs) < 1e-8
    assert errs == sorted(errs, reverse=True) or max(errs) < 1e-9


def test_ell_star_p2_log_growth():
    m = build_model(ModelParams(p=2.0))
    c = m.constants
    r = c.ell_star(1e8) / c.ell_star(1e4)
    assert abs(r - math.sqrt(math.log(1e8) / math.log(1e4))) < 0.05


def test_return_tail_target_value(model):
    # p sin(pi/p) (r*)^(1-1/p) / Gamma(1/p)
    want = (1.5 * math.sin(2 * math.pi / 3) * model.constants.r_star ** (1 / 3)
            / math.gamma(2 / 3))
    assert abs(return_tail_target(model.constants) - want) < 1e-12
    assert abs(want - 1.2113) < 1e-4


def test_sampler_exact_inverse(model):
    law = model.law
    ns = np.arange(1, 50000, dtype=float)
    Ts = law.T(ns)
    for v in [1.0, 0.9, 0.6464467, 0.6464465, 0.25, 1e-3, 2e-7,
              float(law.tail_threshold), float(law.tail_threshold) * 0.99,
              1e-9]:
        n = law.sample_n(v)
        assert float(law.T(float(n))) >= v
        assert float(law.T(float(n + 1))) < v
        if n < 50000:
            brute = int(np.sum(Ts >= v))
            assert n == brute


@given(st.floats(min_value=1e-12, max_value=1.0, exclude_min=True))
@settings(max_examples=200, deadline=None)
def test_sampler_inverse_property(model, v):
    n = model.law.sample_n(v)
    assert n >= 1
    assert float(model.law.T(float(n))) >= v > float(model.law.T(float(n + 1)))


@given(st.floats(min_value=1.05, max_value=2.0),
       st.floats(min_value=-1.0, max_value=0.9))
@settings(max_examples=25, deadline=None)
def test_tail_first_construction_properties(p, kappa):
    try:
        m = build_model(ModelParams(p=p, ell_kind="log-power", kappa=kappa))
    except ModelError:
        return
    ns = np.arange(1, 2000, dtype=float)
    pn = m.law.prob_n(ns)
    assert np.all(pn > 0)
    assert float(m.law.T(1.0)) == 1.0
    assert m.constants.r_star > 1.0
