import math

import numpy as np
import pytest

from diracdecay.disorder import DistributionSpec
from diracdecay.errors import ExcludedK, NearBandEdge, SubcriticalOnly
from diracdecay.lyapunov import (
    beta_closed_form,
    classify,
    coupling_squared_threshold,
    critical_energies,
    estimate_beta,
    lambda_coupling_curve,
    lambda_critical,
    r4_boundedness_probe,
    s_n_normalizer,
)
from diracdecay.model import ModelParams, energy_context

SPEC = DistributionSpec("gaussian")
CTX = energy_context(1.0, 0.0)


def golden_section_max(f, a, b, tol=1e-12):
    """Independent grid/golden-search oracle for the coupling-curve maximum."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    return 0.5 * (a + b)


def bisect_root(f, a, b, tol=1e-12):
    fa = f(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        if (f(m) > 0) == (fa > 0):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def test_beta_closed_form_examples():
    assert abs(beta_closed_form(CTX, 0.3) - 0.03) < 1e-15
    for lam in (0.1, 0.7, 2.0):
        assert abs(beta_closed_form(CTX, lam) - lam * lam / 3.0) < 1e-14
    assert beta_closed_form(CTX, 0.0) == 0.0


def test_beta_band_edge_guard():
    with pytest.warns(Warning):
        ctx = energy_context(2.0 - 1e-15, 0.0)
    with pytest.raises(NearBandEdge):
        beta_closed_form(ctx, 1.0)


def test_lambda_critical_against_golden_search():
    for m in (0.25, 0.5, 1.0, 2.0, 5.0):
        lam_star, e_star = lambda_critical(m)
        top = math.sqrt(m * m + 4.0)
        e_oracle = golden_section_max(
            lambda E: coupling_squared_threshold(E, m), m, top
        )
        assert abs(e_star - e_oracle) < 1e-6
        assert abs(lam_star - lambda_coupling_curve(e_oracle, m)) < 1e-9
        # curve vanishes at both edges
        assert abs(lambda_coupling_curve(m, m)) < 1e-12
        # float cancellation in m^2 + 4 - top^2 leaves sqrt-of-eps residue
        assert abs(lambda_coupling_curve(top, m)) < 1e-7


def test_lambda_critical_exact_value_m1():
    lam_star, e_star = lambda_critical(1.0)
    assert abs(lam_star - (math.sqrt(3.0) - 1.0)) < 1e-12
    assert abs(e_star - math.sqrt(2.0 * math.sqrt(3.0) - 1.0)) < 1e-12


def test_lambda_critical_rejects_massless():
    with pytest.raises(ValueError):
        lambda_critical(0.0)


def test_critical_energies_against_bisection():
    lam, m = 0.5, 1.0
    pair = critical_energies(lam, m)
    assert pair is not None
    _, e_star = lambda_critical(m)

    def g(E):
        return coupling_squared_threshold(E, m) - lam * lam

    lo = bisect_root(g, m + 1e-9, e_star)
    hi = bisect_root(lambda E: -g(E), e_star, math.sqrt(5.0) - 1e-9)
    assert abs(pair[0] - lo) < 1e-9
    assert abs(pair[1] - hi) < 1e-9
    assert abs(pair[0] - 1.14624) < 1e-5
    assert abs(pair[1] - 2.04600) < 1e-5


def test_critical_energies_above_threshold():
    assert critical_energies(2.0, 1.0) is None
    lam_star, _ = lambda_critical(1.0)
    assert critical_energies(lam_star, 1.0) is None  # tangency -> None


def test_classify_examples():
    assert classify(ModelParams(0.0, 5.0, 1.0), 1.0).spectral_type == "ac"
    assert classify(ModelParams(1.0, 0.5, 0.5), 1.5).spectral_type == "sc"
    rep = classify(ModelParams(1.0, 1.0, 0.5), 1.8)
    assert rep.spectral_type == "pp"  # lambda > lambda*(1) ~ 0.732
    assert classify(ModelParams(1.0, 1.0, 0.3), 1.5).spectral_type == "pp"
    assert classify(ModelParams(1.0, 1.0, 0.5), 0.5).spectral_type == "outside_band"
    assert classify(ModelParams(1.0, 0.5, 0.5), -1.5).spectral_type == "sc"


def test_classify_boundary_matches_critical_energies():
    params = ModelParams(1.0, 0.5, 0.5)
    lo, hi = critical_energies(0.5, 1.0)
    eps = 1e-9
    assert classify(params, lo + eps).spectral_type == "sc"
    assert classify(params, lo - eps).spectral_type == "pp"
    assert classify(params, hi - eps).spectral_type == "sc"
    assert classify(params, hi + eps).spectral_type == "pp"
    # boundary points themselves go to the pp branch
    assert classify(params, lo).spectral_type == "pp"
    rep = classify(params, 1.5)
    assert rep.critical_pair == (lo, hi)


def test_classify_alpha_flag():
    params = ModelParams(1.0, 0.5, 0.5000001)
    assert classify(params, 1.5).alpha_class == "supercritical"
    assert classify(params, 1.5, alpha_is_critical=True).spectral_type == "sc"


def test_classify_massless_critical():
    # m = 0: only the upper threshold exists; sc inside, pp outside
    params = ModelParams(0.0, 1.0, 0.5)
    e_up = math.sqrt(4.0 - 2.0 * 1.0**2)  # lambda^2 = (4 - E^2)/2
    assert classify(params, e_up - 1e-6).spectral_type == "sc"
    assert classify(params, e_up + 1e-6).spectral_type == "pp"


def test_beta_criterion_equivalence():
    # beta > 1/2 iff lambda^2 > F(E), on a 100-point grid
    gen = np.random.default_rng(0)
    for _ in range(100):
        m = gen.uniform(0.0, 2.0)
        E = gen.uniform(m + 1e-3, math.sqrt(m * m + 4.0) - 1e-3)
        lam = gen.uniform(0.01, 2.0)
        ctx = energy_context(E, m)
        lhs = beta_closed_form(ctx, lam) > 0.5
        rhs = lam * lam > coupling_squared_threshold(E, m)
        assert lhs == rhs


def test_s_n_normalizer_harmonic():
    N = 100000
    H = float(np.sum(1.0 / np.arange(1, N + 1)))
    assert abs(s_n_normalizer(0.5, N) - H) < 1e-9


def test_estimate_beta_guards():
    with pytest.raises(SubcriticalOnly):
        estimate_beta(CTX, ModelParams(0.0, 1.0, 0.7), SPEC, 100, 2, 0)
    ctx_excl = energy_context(math.sqrt(2.0), 0.0)  # k = -3pi/4
    with pytest.raises(ExcludedK):
        estimate_beta(ctx_excl, ModelParams(0.0, 1.0, 0.5), SPEC, 100, 2, 0)


def test_estimate_beta_zero_coupling():
    est = estimate_beta(CTX, ModelParams(0.0, 0.0, 0.5), SPEC, 2000, 4, 0)
    assert est.beta_hat == 0.0
    assert abs(est.raw_mean) < 2.0 / est.s_N


def test_estimate_beta_lambda_scaling():
    # beta_hat(2 lam) / beta_hat(lam) = 4 within joint CI (quadratic coupling)
    params1 = ModelParams(0.0, 0.25, 0.5)
    params2 = ModelParams(0.0, 0.5, 0.5)
    e1 = estimate_beta(CTX, params1, SPEC, 20000, 24, seed=7, threads=2)
    e2 = estimate_beta(CTX, params2, SPEC, 20000, 24, seed=7, threads=2)
    ratio = e2.beta_hat / e1.beta_hat
    rel = 3.0 * (
        e1.stderr / e1.beta_hat + e2.stderr / e2.beta_hat
    ) + 0.05
    assert abs(ratio - 4.0) <= 4.0 * rel


def test_estimators_agree_subcritically():
    # at alpha < 1/2 the comparison-constant band O(1)/s_N is negligible and
    # the product- and recursion-based estimators must agree
    params = ModelParams(0.0, 1.0, 0.3)
    est = estimate_beta(CTX, params, SPEC, 10000, 40, seed=3, threads=2)
    beta = beta_closed_form(CTX, 1.0)
    band = 1.3 / est.s_N  # half-width of the two-angle comparison constants
    joint = 2.0 * math.hypot(est.raw_stderr, est.product_stderr)
    assert abs(est.product_mean - est.raw_mean) <= joint + band
    assert abs(est.raw_mean - beta) <= 0.25 * beta
    assert abs(est.beta_hat - beta) <= 0.1 * beta
    assert abs(est.median_of_means - est.raw_mean) <= 3.0 * est.raw_stderr


def test_r4_probe_contrast():
    probe_super = r4_boundedness_probe(
        ModelParams(0.0, 1.0, 1.0), SPEC, [0.9, 1.1], N=8000, M=200, seed=5, threads=2
    )
    probe_sub = r4_boundedness_probe(
        ModelParams(0.0, 1.0, 0.4), SPEC, [0.9, 1.1], N=8000, M=200, seed=5, threads=2
    )
    assert probe_super.bounded
    assert not probe_sub.bounded
    assert np.all(probe_sub.growth > 1.0)


def test_r4_probe_zero_coupling():
    probe = r4_boundedness_probe(
        ModelParams(0.0, 0.0, 1.0), SPEC, [1.0], N=2000, M=10, seed=1
    )
    assert probe.bounded
    assert np.max(np.abs(probe.log_means)) < 1e-12  # R identically 1
