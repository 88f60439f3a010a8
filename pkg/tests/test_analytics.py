"""Analytics contracts: series, integro-differential oracle, products, asymptotics."""

import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from fragkit import analytics as an, laws
from fragkit.errors import (
    ArithmeticLaw,
    DomainError,
    PoleError,
    SingularBeta,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

BINARY = laws.BinaryUniformConservative()
STICK = laws.StickBreakingLossy()
STICK_C = laws.StickBreakingConservative()
FIL21 = laws.FilippovPower(2.0, 1.0)
FIL1510 = laws.FilippovPower(1.5, 1.0)
DIRI = laws.DirichletPolynomial(terms=((1.2, 0.7), (0.9, 2.0)))

NONARITH = [BINARY, STICK, STICK_C, FIL21, FIL1510, DIRI]


# ---------------------------------------------------------------------------
# finite product g(n, beta)
# ---------------------------------------------------------------------------

def test_gamma_n_base_cases():
    assert an.gamma_n(STICK, 0, 1.3, 1.0) == 1.0
    assert an.gamma_n(STICK, 1, 1.3, 1.0) == pytest.approx(STICK.psi(1.3), rel=1e-15)


def test_gamma_n_power_law_pochhammer_ratio():
    # g(n, beta) = (A)_n/(B)_n with A = beta - beta*, B = beta + theta
    beta, n = 1.7, 7
    A, B = beta - 1.0, beta + 1.0
    ref = 1.0
    for k in range(n):
        ref *= (A + k) / (B + k)
    assert an.gamma_n(FIL21, n, beta, 1.0) == pytest.approx(ref, rel=1e-13)


def test_gamma_n_rejects_left_of_abscissa():
    with pytest.raises(DomainError):
        an.gamma_n(STICK, 2, -0.2, 1.0)


# ---------------------------------------------------------------------------
# series evaluation
# ---------------------------------------------------------------------------

def test_series_initial_value_exact():
    ev = an.m_series(FIL21, 0.0, 1.3, 1.0)
    assert ev.value == 1.0 and ev.terms_used == 1


def test_series_small_t_expansion():
    # m(t, 1) = 1 - psi(1) t + O(t^2) with psi(1) = 1/2 for stick breaking
    t = 1e-3
    ev = an.m_series(STICK, t, 1.0, 1.0, rel_tol=1e-14)
    assert abs(ev.value - (1.0 - 0.5 * t)) < 0.5 * t**2


def test_series_conservative_is_identically_one():
    for t in (0.5, 3.0, 25.0):
        assert an.m_series(BINARY, t, 1.0, 1.0).value == pytest.approx(1.0, abs=1e-14)


def test_series_singular_beta_polynomial():
    # beta + alpha*n0 = beta* terminates the series: degree-n0 polynomial
    alpha, n0 = 0.4, 2
    beta = 1.0 - alpha * n0
    ev = an.m_series(FIL21, 4.0, beta, alpha, rel_tol=1e-14)
    g2 = an.gamma_n(FIL21, 2, beta, alpha)
    poly = 1.0 - 4.0 * an.gamma_n(FIL21, 1, beta, alpha) + 4.0**2 / 2.0 * g2
    assert ev.value == pytest.approx(poly, rel=1e-13)
    # leading behaviour g(n0, beta) t^n0 / n0!
    big = an.m_series(FIL21, 1e6, beta, alpha, rel_tol=1e-14)
    assert big.value == pytest.approx(g2 * 1e12 / 2.0, rel=1e-5)


def test_series_diagnostics_and_cancellation_bound():
    for law in (FIL21, STICK):
        ev = an.m_series(law, 30.0, an.beta_star_of(law) + 1.0, 1.0, rel_tol=1e-13)
        assert ev.cancellation_digits_lost >= 0.0
        assert ev.cancellation_digits_lost <= 30.0 * math.log10(math.e) + 5.0
        assert ev.max_term_magnitude >= 1.0
        assert ev.working_precision_bits >= 128


def test_series_stability_under_doubling():
    ev = an.m_series(STICK, 12.0, 1.1, 1.0, rel_tol=1e-12)
    with mp.workprec(2 * ev.working_precision_bits):
        again, _, _ = an._series_sum_mp(STICK, 12.0, 1.1, 1.0)
        assert abs(ev.mp_value - again) <= 1e-12 * abs(again)


# ---------------------------------------------------------------------------
# integro-differential oracle
# ---------------------------------------------------------------------------

def test_integro_slope_at_zero():
    sol = an.m_integro(FIL21, 2.0, 1.5, 1.0, step=0.01)
    assert sol.derivatives[0] == pytest.approx(-FIL21.psi(1.5), abs=1e-10)


def test_integro_matches_series():
    sol = an.m_integro(STICK, 6.0, GOLDEN + 0.5, 1.0, step=0.01)
    for t in (0.5, 2.0, 6.0):
        ref = an.m_series(STICK, t, GOLDEN + 0.5, 1.0, rel_tol=1e-14).value
        assert abs(float(sol(t)) - ref) <= 1e-6 * abs(ref)


def test_integro_conservative_flat():
    sol = an.m_integro(BINARY, 5.0, 1.0, 1.0, step=0.02)
    assert np.max(np.abs(sol.values - 1.0)) < 1e-10


def test_integro_atomic_law():
    at = laws.UserAtomic(groups=((1.0, (0.5, 0.5)),))
    sol = an.m_integro(at, 4.0, 2.0, 1.0, step=0.01)
    ref = an.m_series(at, 4.0, 2.0, 1.0, rel_tol=1e-14).value
    assert abs(sol.values[-1] - ref) <= 1e-8 * abs(ref)


# ---------------------------------------------------------------------------
# derivative identity
# ---------------------------------------------------------------------------

def test_derivative_identity():
    assert an.derivative_identity_check(FIL21, 2.0, 1.3, 0, 1.0) == 0.0
    assert an.derivative_identity_check(FIL21, 2.0, 1.3, 1, 1.0) < 1e-6
    assert an.derivative_identity_check(STICK, 1.0, 1.0, 2, 1.0) < 1e-6
    # at t = 0 the k-th derivative equals (-1)^k g(k, beta)
    assert an.derivative_identity_check(FIL21, 0.0, 1.3, 2, 1.0) < 1e-6


# ---------------------------------------------------------------------------
# extrapolated product
# ---------------------------------------------------------------------------

def test_gamma_z_base_cases():
    g0 = an.gamma_z(STICK, 0.0, 1.2, 1.0)
    assert g0.value == 1.0
    g1 = an.gamma_z(STICK, 1.0, 1.2, 1.0)
    assert g1.value == pytest.approx(STICK.psi(1.2), rel=1e-13)


@pytest.mark.parametrize("z", [0.3, 1.7, 0.5 + 1.0j])
def test_gamma_z_power_law_gamma_ratio(z):
    g = an.gamma_z(FIL21, z, 1.3, 1.0, tol=1e-12)
    ref = an.filippov_gamma_closed_form(z, 1.3, 2.0, 1.0)
    assert abs(g.value - ref) <= 1e-10 * abs(ref)


def test_gamma_z_general_alpha_gamma_ratio():
    alpha = 0.7
    g = an.gamma_z(FIL21, 0.9, 1.4, alpha, tol=1e-12)
    ref = an.filippov_gamma_closed_form(0.9, 1.4, 2.0, 1.0, alpha=alpha)
    assert abs(g.value - ref) <= 1e-10 * abs(ref)


def test_gamma_z_identities_random_points():
    rng = np.random.default_rng(99)
    for law in (STICK, DIRI):
        checked = 0
        while checked < 20:
            z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
            beta = (law.beta_a if math.isfinite(law.beta_a) else 0.0) + 0.15 + rng.uniform(0, 2)
            try:
                g0 = an.gamma_z(law, z, beta, 1.0, tol=1e-12).value
                g1 = an.gamma_z(law, z + 1, beta, 1.0, tol=1e-12).value
                gr = an.gamma_z(law, -z, z + beta, 1.0, tol=1e-12).value
            except (PoleError, DomainError):
                continue
            assert abs(g1 - law.psi(beta + z) * g0) <= 1e-9 * abs(g0)
            assert abs(gr * g0 - 1.0) <= 1e-8
            checked += 1


def test_gamma_z_pole_and_singular_errors():
    # z = (beta* - beta)/alpha is the rightmost pole
    with pytest.raises(PoleError):
        an.gamma_z(FIL21, 1.0 - 1.5, 1.5, 1.0)
    # singular beta: a numerator factor vanishes (beta + alpha*k = beta*)
    with pytest.raises(SingularBeta):
        an.gamma_z(FIL21, 0.37, 1.0 - 2 * 0.4, 0.4)


# ---------------------------------------------------------------------------
# asymptotic coefficient and limit moments
# ---------------------------------------------------------------------------

def test_coefficient_at_first_moment_point():
    # C(beta* + alpha) = 1/(alpha psi'(beta*)) = first limit moment
    for law in (FIL21, STICK, DIRI):
        bs = an.beta_star_of(law)
        for alpha in (1.0, 0.8):
            c = an.asymptotic_coefficient(law, bs + alpha, alpha)
            assert c == pytest.approx(1.0 / (alpha * law.psi_prime(bs)), rel=1e-9)


def test_coefficient_power_law_closed_form():
    for alpha in (1.0, 2.0):
        for beta in (0.0, 1.3, 2.0):
            c = an.asymptotic_coefficient(FIL21, beta, alpha)
            ref = an.filippov_asymptotic_coefficient(2.0, 1.0, alpha, beta)
            assert c == pytest.approx(ref, rel=1e-9)


def test_mean_particle_count_coefficient():
    # m(t, 0) ~ Gamma(theta/alpha)/Gamma(lam/alpha) t^((lam-theta)/alpha)
    lam, theta, alpha = 1.5, 1.0, 1.0
    law = laws.FilippovPower(lam, theta)
    c = an.asymptotic_coefficient(law, 0.0, alpha)
    assert c == pytest.approx(math.gamma(theta / alpha) / math.gamma(lam / alpha), rel=1e-9)


def test_coefficient_guards():
    with pytest.raises(PoleError):
        an.asymptotic_coefficient(FIL21, 1.0, 1.0)  # beta = beta*
    grid = laws.UserAtomic(groups=((1.0, (0.5, 0.25, 0.25)),))
    assert grid.arithmetic
    with pytest.raises(ArithmeticLaw):
        an.asymptotic_coefficient(grid, 1.2, 1.0)


def test_rho_moments_power_law_pochhammer():
    for lam, theta, alpha in [(2.0, 1.0, 1.0), (1.5, 1.0, 1.0), (2.0, 0.8, 1.3)]:
        law = laws.FilippovPower(lam, theta)
        for k in range(1, 7):
            ref = 1.0
            for i in range(k):
                ref *= lam / alpha + i
            assert an.rho_moment(law, k, alpha) == pytest.approx(ref, rel=1e-12)


def test_rho_moment_k1_is_slope_reciprocal():
    for law in (STICK, DIRI):
        bs = an.beta_star_of(law)
        assert an.rho_moment(law, 1, 1.0) == pytest.approx(
            1.0 / law.psi_prime(bs), rel=1e-12
        )


def test_rho_moments_log_convex():
    for law in NONARITH:
        assert an.rho_moments(law, 10, 1.0).log_convex()


# ---------------------------------------------------------------------------
# power-law closed forms
# ---------------------------------------------------------------------------

def test_limit_density_gamma_shape():
    # (lam, theta, alpha) = (2,1,1): density x e^-x
    xs = np.linspace(0.1, 6.0, 25)
    assert np.allclose(an.filippov_rho_density(2.0, 1.0, 1.0, xs), xs * np.exp(-xs), rtol=1e-12)
    total, _ = integrate.quad(lambda x: an.filippov_rho_density(2.0, 1.0, 1.0, x), 0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-10)
    mean, _ = integrate.quad(lambda x: x * an.filippov_rho_density(2.0, 1.0, 1.0, x), 0, np.inf)
    assert mean == pytest.approx(2.0, abs=1e-9)
    assert mean == pytest.approx(an.rho_moment(FIL21, 1, 1.0), abs=1e-9)


def test_limit_density_general_alpha_moments():
    lam, theta, alpha = 2.0, 0.8, 1.5
    for k in (1, 2, 3):
        val, _ = integrate.quad(
            lambda x: x ** (alpha * k) * an.filippov_rho_density(lam, theta, alpha, x),
            0,
            np.inf,
        )
        assert val == pytest.approx(an.rho_moment(laws.FilippovPower(lam, theta), k, alpha),
                                    rel=1e-8)
    cdf_mid = an.filippov_rho_cdf(lam, theta, alpha, 1.0)
    num, _ = integrate.quad(lambda x: an.filippov_rho_density(lam, theta, alpha, x), 0, 1.0)
    assert cdf_mid == pytest.approx(num, abs=1e-10)


# ---------------------------------------------------------------------------
# Dirichlet polynomials
# ---------------------------------------------------------------------------

def test_dirichlet_roots_and_psi_factorisation():
    terms = ((1.2, 0.7), (0.9, 2.0))
    roots = an.dirichlet_roots(terms)
    assert roots.size == 2
    # psi(beta) = prod (beta - beta_i) / prod (beta + theta_j)
    law = laws.DirichletPolynomial(terms=terms)
    for beta in (1.3, 2.6):
        ref = np.prod([beta - r for r in roots]) / np.prod([beta + t for _, t in terms])
        assert law.psi(beta) == pytest.approx(float(np.real(ref)), rel=1e-12)
    assert roots[0].real == pytest.approx(an.beta_star_of(law), abs=1e-11)


def test_hypergeometric_coefficient_matches_generic():
    terms = ((1.2, 0.7), (0.9, 2.0))
    law = laws.DirichletPolynomial(terms=terms)
    for beta in (1.4, 2.2, 3.1):
        c = an.hypergeometric_coefficient(terms, beta)
        C = an.asymptotic_coefficient(law, beta, 1.0)
        assert abs(c - C) <= 1e-8 * abs(C)


def test_hypergeometric_p1_reduces_to_power_law():
    c = an.hypergeometric_coefficient(((2.0, 1.0),), 1.6)
    assert c == pytest.approx(an.filippov_asymptotic_coefficient(2.0, 1.0, 1.0, 1.6), rel=1e-12)


def test_dirichlet_slope_formula():
    terms = ((1.2, 0.7), (0.9, 2.0))
    law = laws.DirichletPolynomial(terms=terms)
    bs = an.beta_star_of(law)
    assert an.dirichlet_psi_prime_at_root(terms, bs) == pytest.approx(
        law.psi_prime(bs), rel=1e-12
    )


def test_dirichlet_integer_moments_match_generic():
    terms = ((1.2, 0.7), (0.9, 2.0))
    law = laws.DirichletPolynomial(terms=terms)
    for k in range(1, 7):
        assert an.dirichlet_integer_moment(terms, k) == pytest.approx(
            an.rho_moment(law, k, 1.0), rel=1e-10
        )


# ---------------------------------------------------------------------------
# homogeneous case and tagged moments
# ---------------------------------------------------------------------------

def test_homogeneous_exponential_formula():
    for law in (BINARY, STICK):
        bs = an.beta_star_of(law)
        assert an.homogeneous_m(law, 5.0, bs) == pytest.approx(1.0, abs=1e-12)
        for t in (0.0, 1.0, 7.0, 20.0):
            ref = an.m_series(law, t, bs + 0.6, 0.0, rel_tol=1e-14).value
            assert an.homogeneous_m(law, t, bs + 0.6) == pytest.approx(ref, rel=1e-10)


def test_y_moment_consistency_reports():
    for law in (FIL21, STICK, STICK_C):
        rep = an.y_moments_consistency(law, 1.0, 6)
        assert rep["ok"], rep
        assert rep["moments_max_rel"] < 1e-10
        assert rep["pointwise_max"] < 1e-12
