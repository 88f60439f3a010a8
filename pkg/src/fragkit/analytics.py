"""Closed-form and numerical analytics for mean power sums.

For a fragmentation with self-similarity index alpha and reproduction law
with Mellin transform phi, the mean power sum m(t, beta) = E sum_j X_j^beta(t)
solves

    d/dt m(t, beta) = -m(t, beta) + integral_0^1 m(x^alpha t, beta) x^beta sigma(dx),
    m(0, beta) = 1,

and expands as the entire series m(t, beta) = sum_n (-t)^n/n! * g(n, beta)
with g(n, beta) = prod_{k<n} psi(beta + alpha k), psi = 1 - phi.  This module
evaluates:

* g(n, beta) exactly and its extrapolation g(z, beta) to complex z as the
  infinite product prod_k psi(beta+alpha k)/psi(beta+alpha(k+z)), accelerated
  with an Euler-Maclaurin tail;
* the series in adaptive-precision arithmetic (the terms alternate and lose
  about t/ln 10 digits to cancellation);
* the integro-differential equation by a causal method of steps (independent
  cross-check of the series);
* the leading large-t asymptotics m(t,beta) ~ C(beta) t^((beta*-beta)/alpha)
  through the residue coefficient C, and the limit-measure moments
  int x^(alpha k) rho(dx) = (k-1)!/(alpha psi'(beta*)) prod_{j<k} 1/psi(beta*+alpha j);
* closed forms for the power-density family (Kummer-type series, gamma-ratio
  extrapolation, gamma-type limit density) and for Dirichlet polynomials.
"""

import functools
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy import special

from .errors import (
    ArithmeticLaw,
    DomainError,
    PoleError,
    PrecisionExhausted,
    RootFindingFailure,
    SingularBeta,
    UnsupportedRepresentation,
)
from .laws import malthusian_exponent


@functools.lru_cache(maxsize=256)
def beta_star_of(law, tol=1e-14):
    """Cached Malthusian exponent at analytics-grade tolerance."""
    return malthusian_exponent(law, tol=tol)


# ---------------------------------------------------------------------------
# finite products
# ---------------------------------------------------------------------------

def gamma_n(law, n, beta, alpha):
    """g(n, beta) = prod_{k=0}^{n-1} psi(beta + alpha k); g(0, beta) = 1."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = 1.0 + 0.0j if np.iscomplexobj(beta) or isinstance(beta, complex) else 1.0
    for k in range(n):
        out = out * law.psi(beta + alpha * k)
    return out


# ---------------------------------------------------------------------------
# adaptive-precision series
# ---------------------------------------------------------------------------

@dataclass
class SeriesEvaluation:
    """Value of m(t, beta) with precision and cancellation diagnostics.

    ``cancellation_digits_lost`` = log10(max term / |value|): the alternating
    series loses about t/ln 10 digits, which is why the summation runs in
    adaptive-precision arithmetic.  ``mp_value`` keeps the full-precision
    result for downstream big-float work.
    """

    value: complex
    working_precision_bits: int
    terms_used: int
    max_term_magnitude: float
    cancellation_digits_lost: float
    mp_value: object = None


def _series_sum_mp(law, t, beta, alpha):
    """One summation pass at the ambient mpmath precision."""
    tm = mp.mpmathify(t)
    bm = mp.mpmathify(beta)
    am = mp.mpmathify(alpha)
    eps = mp.mpf(2) ** (1 - mp.mp.prec)
    term = mp.mpf(1)
    total = mp.mpf(0) if mp.im(bm) == 0 else mp.mpc(0)
    max_term = mp.mpf(0)
    consec = 0
    n = 0
    while n < 200000:
        total += term
        a = abs(term)
        if a > max_term:
            max_term = a
        if term == 0:  # singular beta: the series terminated exactly
            break
        nxt = term * (-tm) / (n + 1) * (1 - law.phi_mp(bm + am * n))
        if a < eps * max_term:
            consec += 1
            if consec >= 10:
                break
        else:
            consec = 0
        term = nxt
        n += 1
    return total, n + 1, max_term


def m_series(law, t, beta, alpha, rel_tol=1e-12, start_bits=128, max_bits=4096):
    """Sum the power series for m(t, beta), doubling precision until stable.

    Two successive evaluations (at p and 2p bits) must agree to ``rel_tol``;
    the accepted value is the higher-precision one.  Raises
    PrecisionExhausted (with diagnostics attached) at the ``max_bits`` cap,
    which bounds usable t to roughly max_bits * ln 2 / 1 ~ 2800.
    """
    if np.real(beta) <= law.beta_a:
        raise DomainError(f"Re beta = {np.real(beta)} <= abscissa {law.beta_a}")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return SeriesEvaluation(1.0, start_bits, 1, 1.0, 0.0, mp.mpf(1))

    prev = None
    bits = start_bits
    last = None
    while bits <= max_bits:
        with mp.workprec(bits):
            total, n_terms, max_term = _series_sum_mp(law, t, beta, alpha)
        last = (total, n_terms, max_term, bits)
        if prev is not None:
            with mp.workprec(bits):
                diff = abs(total - prev)
                scale = abs(total)
                stable = (scale == 0 and diff == 0) or (scale > 0 and diff <= rel_tol * scale)
            if stable:
                absval = abs(total)
                lost = float(mp.log10(max_term / absval)) if absval > 0 else float("inf")
                val = complex(total)
                if abs(val.imag) == 0.0:
                    val = val.real
                return SeriesEvaluation(
                    value=val,
                    working_precision_bits=bits,
                    terms_used=n_terms,
                    max_term_magnitude=float(max_term),
                    cancellation_digits_lost=max(lost, 0.0),
                    mp_value=total,
                )
        prev = total
        bits *= 2
    raise PrecisionExhausted(
        f"series for m({t}, {beta}) not stable at {max_bits} bits",
        diagnostics=SeriesEvaluation(
            value=complex(last[0]),
            working_precision_bits=last[3],
            terms_used=last[1],
            max_term_magnitude=float(last[2]),
            cancellation_digits_lost=float("nan"),
            mp_value=last[0],
        ),
    )


# ---------------------------------------------------------------------------
# integro-differential oracle (method of steps)
# ---------------------------------------------------------------------------

@dataclass
class IntegroSolution:
    """m on a uniform grid plus a cubic-Hermite evaluator of the history."""

    ts: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    beta: float
    alpha: float
    quad_nodes: int

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return _hermite_eval(self.ts, self.values, self.derivatives, t)


def _hermite_eval(ts, ms, ds, tq):
    idx = np.clip(np.searchsorted(ts, tq, side="right") - 1, 0, len(ts) - 2)
    t0 = ts[idx]
    hh = ts[idx + 1] - t0
    s = np.where(hh > 0, (tq - t0) / np.where(hh > 0, hh, 1.0), 0.0)
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s**2 * (3 - 2 * s)
    h11 = s**2 * (s - 1)
    return h00 * ms[idx] + hh * h10 * ds[idx] + h01 * ms[idx + 1] + hh * h11 * ds[idx + 1]


def _gauss_unit_weight(gamma_exp, n):
    """Nodes/weights for integral_0^1 u^gamma f(u) du (Gauss-Jacobi).

    Weights are renormalised so the rule integrates f = 1 exactly (scipy's
    raw weights carry ~1e-11 relative normalisation error).
    """
    x, w = special.roots_jacobi(n, 0.0, gamma_exp)
    w = w * 0.5 ** (gamma_exp + 1.0)
    return (x + 1.0) / 2.0, w * (1.0 / (gamma_exp + 1.0) / w.sum())


def m_integro(law, t_max, beta, alpha, step=None, quad_tol=1e-9, n_nodes=48):
    """Solve the Cauchy problem for m(., beta) forward on a uniform grid.

    Causality (x <= 1 so x^alpha t <= t) makes this a method of steps: the
    integral term needs m only at earlier scaled times, read from a cubic
    Hermite interpolant with exact stored derivatives.  Each step closes the
    implicit dependence near x = 1 by fixed-point iteration on the
    integrating-factor Simpson rule.  The x-integral folds the structural
    density's power behaviour into Gauss-Jacobi weights exactly (one rule per
    power component; node count doubled until two rules agree to quad_tol).
    Independent of m_series by construction.
    """
    if not math.isfinite(beta) or np.iscomplexobj(beta):
        raise ValueError("m_integro is a real-beta oracle")
    if beta <= law.beta_a:
        raise DomainError(f"beta = {beta} <= abscissa {law.beta_a}")
    comps = law.sigma_power_components()
    atoms = law.sigma_atoms()
    if comps is None and atoms is None:
        raise UnsupportedRepresentation(f"{law.kind}: no density/atom representation")

    while True:
        sol = _integro_march(law, t_max, beta, alpha, step, comps, atoms, n_nodes)
        if comps is None:
            return sol  # atomic integral is exact
        check = _integro_march(law, min(t_max, max(t_max / 8, 10 * sol.ts[1])), beta,
                               alpha, step, comps, atoms, 2 * n_nodes)
        i = len(check.ts) - 1
        ref = check.values[i]
        if abs(sol(check.ts[i]) - ref) <= quad_tol * max(1.0, abs(ref)):
            return sol
        n_nodes *= 2
        if n_nodes > 512:
            return sol


def _integro_march(law, t_max, beta, alpha, step, comps, atoms, n_nodes):
    h = step if step is not None else min(0.005, max(t_max / 2000.0, 1e-4))
    n = max(1, int(math.ceil(t_max / h)))
    h = t_max / n
    ts = np.linspace(0.0, t_max, n + 1)
    ms = np.empty(n + 1)
    ds = np.empty(n + 1)

    rules = []
    if comps is not None:
        for c, q in comps:
            u, w = _gauss_unit_weight(beta + q, n_nodes)
            rules.append((c, u**alpha, w))
    if atoms is not None:
        ax = np.array([x for x, _ in atoms])
        aw = np.array([wt * x**beta for x, wt in atoms])
        rules.append((1.0, ax**alpha, aw))

    def I_of(tq, upto, m_end=None, d_end=None, t_end=None):
        tt = ts[: upto + 1]
        mm = ms[: upto + 1]
        dd = ds[: upto + 1]
        if m_end is not None:
            tt = np.append(tt, t_end)
            mm = np.append(mm, m_end)
            dd = np.append(dd, d_end)
        tot = 0.0
        for c, xa, w in rules:
            tot += c * np.dot(w, _hermite_eval(tt, mm, dd, xa * tq))
        return tot

    ms[0] = 1.0
    ds[0] = -1.0 + I_of(0.0, 0)
    eh = math.exp(-h)
    # integrating factor m(t+h) = e^-h m(t) + int_0^h e^-(h-s) I(t+s) ds with
    # the s-integral exact for quadratic I (so constants are preserved exactly):
    # moments M_k = int_0^h e^-(h-s) s^k ds via expm1-safe forms
    em = math.expm1(-h)
    M0 = -em
    A1 = -h - (1.0 + h) * em
    A2 = -2.0 * h - h * h - (2.0 + 2.0 * h + h * h) * em
    M1 = h * M0 - A1
    M2 = h * h * M0 - 2.0 * h * A1 + A2
    a, b = M1 / h, M2 / (h * h)
    W1 = 4.0 * (a - b)
    W2 = 2.0 * b - a
    W0 = M0 - W1 - W2
    for i in range(n):
        t0 = ts[i]
        t1 = ts[i + 1]
        tm = t0 + h / 2
        I0 = I_of(t0, i)
        m1 = ms[i] + h * ds[i]
        d1 = ds[i]
        for _ in range(8):
            Imid = I_of(tm, i, m1, d1, t1)
            I1 = I_of(t1, i, m1, d1, t1)
            m_new = eh * ms[i] + W0 * I0 + W1 * Imid + W2 * I1
            d_new = -m_new + I1
            done = abs(m_new - m1) <= 1e-15 * (1.0 + abs(m_new))
            m1, d1 = m_new, d_new
            if done:
                break
        ms[i + 1] = m1
        ds[i + 1] = d1
    return IntegroSolution(ts, ms, ds, beta, alpha, n_nodes)


# ---------------------------------------------------------------------------
# derivative identity
# ---------------------------------------------------------------------------

_FD_STENCILS = {
    # (offsets, numerator coefficients, denominator): 4th-order central
    1: ((-2, -1, 1, 2), (1, -8, 8, -1), 12.0),
    2: ((-2, -1, 0, 1, 2), (-1, 16, -30, 16, -1), 12.0),
    3: ((-3, -2, -1, 1, 2, 3), (1, -8, 13, -13, 8, -1), 8.0),
    4: ((-3, -2, -1, 0, 1, 2, 3), (-1, 12, -39, 56, -39, 12, -1), 6.0),
}

_FD_FORWARD = {
    # one-sided variants for t near 0 (4th-order)
    1: ((0, 1, 2, 3, 4), (-25, 48, -36, 16, -3), 12.0),
    2: ((0, 1, 2, 3, 4, 5), (45, -154, 214, -156, 61, -10), 12.0),
}


def derivative_identity_check(law, t, beta, k, alpha, h=0.01):
    """Relative residual of d^k/dt^k m(t, beta) = (-1)^k g(k, beta) m(t, beta + k alpha).

    The k-th term shift in the series gives g(n+k, beta) =
    g(k, beta) g(n, beta + alpha k), hence the second argument beta + k*alpha.
    The left side uses 4th-order central differences at a moderate step in
    big-float arithmetic: the series noise (~1e-25 relative) amplified by
    h^-k stays far below the h^4 truncation (~1e-8), which dominates.
    """
    if k == 0:
        return 0.0
    if k not in _FD_STENCILS:
        raise ValueError("k up to 4 supported")
    with mp.workprec(320):
        f = lambda tt: m_series(law, tt, beta, alpha, rel_tol=1e-25, start_bits=320).mp_value
        hh = mp.mpf(h)
        offs, coefs, den = _FD_STENCILS[k]
        if t - 3 * h < 0:
            if t >= 4 * h:
                hh = mp.mpf(t) / 4
            elif k in _FD_FORWARD:
                offs, coefs, den = _FD_FORWARD[k]
            else:
                raise ValueError(f"k={k} derivative needs t >= {3 * h} (or a smaller h)")
        lhs = mp.fsum([c * f(mp.mpf(t) + o * hh) for o, c in zip(offs, coefs)]) / (den * hh**k)
        gk = mp.mpf(1)
        for j in range(k):
            gk *= 1 - law.phi_mp(mp.mpmathify(beta) + mp.mpmathify(alpha) * j)
        rhs = (-1) ** k * gk * m_series(law, t, beta + k * alpha, alpha, rel_tol=1e-25,
                                        start_bits=320).mp_value
        denom = max(abs(rhs), mp.mpf("1e-300"))
        return float(abs(lhs - rhs) / denom)


# ---------------------------------------------------------------------------
# extrapolated product g(z, beta)
# ---------------------------------------------------------------------------

@dataclass
class GammaExtrapolation:
    """Value of the extrapolated product with truncation diagnostics."""

    z: complex
    beta: complex
    value: complex
    truncation_K: int
    tail_estimate: float


def _logpsi_window_float(law, s0, az, psi_inf):
    """integral_0^1 [log psi(s0 + u*az) - log psi_inf] du, 64-node Gauss."""
    x, w = np.polynomial.legendre.leggauss(64)
    u = (x + 1.0) / 2.0
    vals = np.array([np.log(law.psi(s0 + uu * az)) for uu in u]) - np.log(psi_inf)
    return 0.5 * np.dot(w, vals)


def _gamma_z_once_float(law, z, beta, alpha, K):
    psi_inf = 1.0 - law.atom_mass_at_one
    prod = 1.0 + 0.0j
    for k in range(K):
        num = law.psi(beta + alpha * k)
        den = law.psi(beta + alpha * (k + z))
        if abs(num) < 1e-300:
            raise SingularBeta(f"psi(beta + {k} alpha) = 0: beta is singular")
        if abs(den) < 1e-12:
            raise PoleError(f"psi(beta + alpha(k+z)) ~ 0 at k={k}: z is a pole")
        prod *= num / den

    G = lambda k: np.log(law.psi(beta + alpha * k)) - np.log(law.psi(beta + alpha * (k + z)))
    g = {o: G(K + o) for o in (-2, -1, 0, 1, 2)}
    window = z * _logpsi_window_float(law, beta + alpha * K, alpha * z, psi_inf)
    d1 = (-g[2] + 8 * g[1] - 8 * g[-1] + g[-2]) / 12.0
    d3 = (g[2] - 2 * g[1] + 2 * g[-1] - g[-2]) / 2.0
    tail = window + g[0] / 2.0 - d1 / 12.0 + d3 / 720.0
    return prod * np.exp(tail), abs(tail)


def _gamma_z_once_mp(law, z, beta, alpha, K):
    one = mp.mpf(1)
    psi_inf = one - mp.mpmathify(law.atom_mass_at_one)
    zm = mp.mpmathify(z)
    bm = mp.mpmathify(beta)
    am = mp.mpmathify(alpha)
    psi = lambda s: 1 - law.phi_mp(s)
    prod = one
    for k in range(K):
        num = psi(bm + am * k)
        den = psi(bm + am * (k + zm))
        if abs(num) < mp.mpf("1e-300"):
            raise SingularBeta(f"psi(beta + {k} alpha) = 0: beta is singular")
        if abs(den) < mp.mpf("1e-14"):
            raise PoleError(f"psi(beta + alpha(k+z)) ~ 0 at k={k}: z is a pole")
        prod *= num / den
    G = lambda k: mp.log(psi(bm + am * k)) - mp.log(psi(bm + am * (k + zm)))
    sK = bm + am * K
    window = zm * mp.quad(lambda u: mp.log(psi(sK + u * am * zm)) - mp.log(psi_inf), [0, 1])
    d1 = mp.diff(G, K, 1)
    d3 = mp.diff(G, K, 3)
    d5 = mp.diff(G, K, 5)
    tail = window + G(K) / 2 - d1 / 12 + d3 / 720 - d5 / 30240
    return prod * mp.e**tail, abs(tail)


def gamma_z(law, z, beta, alpha, tol=1e-11, precision_bits=None):
    """Extrapolate g(., beta) to complex z via the normalised infinite product.

    Satisfies the functional equation g(z+1, beta) = psi(beta + alpha z) g(z, beta)
    and the reciprocal identity g(-z, alpha z + beta) g(z, beta) = 1.  The tail
    past the truncation K is summed by Euler-Maclaurin: a window integral of
    log psi plus derivative corrections; K doubles until two evaluations agree
    to ``tol``.  ``precision_bits`` switches to big-float arithmetic (needed
    when downstream asymptotics consume the value at extreme accuracy).
    """
    if np.real(beta) <= law.beta_a:
        raise DomainError(f"Re beta = {np.real(beta)} <= abscissa {law.beta_a}")
    zc = complex(z)
    if zc == 0:
        return GammaExtrapolation(z, beta, 1.0, 0, 0.0)
    if zc.imag == 0 and abs(zc.real - round(zc.real)) < 1e-15:
        n = int(round(zc.real))
        if n >= 0:
            val = gamma_n(law, n, beta, alpha)
            return GammaExtrapolation(z, beta, val, n, 0.0)

    once = _gamma_z_once_mp if precision_bits else _gamma_z_once_float
    ctx = mp.workprec(precision_bits) if precision_bits else _nullcontext()
    with ctx:
        K = 64
        prev, _ = once(law, z, beta, alpha, K)
        while K <= (1 << 17):
            K *= 2
            cur, tail = once(law, z, beta, alpha, K)
            scale = abs(cur)
            if scale > 0 and abs(cur - prev) <= tol * scale:
                value = cur if precision_bits else _tidy_complex(cur)
                return GammaExtrapolation(z, beta, value, K, float(abs(cur - prev) / scale))
            prev = cur
        raise PrecisionExhausted(f"g(z, beta) product not stable at K={K}")


class _nullcontext:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


def _tidy_complex(v):
    v = complex(v)
    return v.real if v.imag == 0.0 else v


# ---------------------------------------------------------------------------
# asymptotics and limit-measure moments
# ---------------------------------------------------------------------------

def asymptotic_coefficient(law, beta, alpha, tol=1e-11, precision_bits=None):
    """C(beta) in m(t, beta) ~ C(beta) t^((beta*-beta)/alpha) for nonarithmetic laws.

    C(beta) = Gamma((beta-beta*)/alpha) * psi(beta)/(alpha psi'(beta*))
              / g((beta-beta*)/alpha, alpha + beta*),
    using the reciprocal identity to place the product's second argument at
    alpha + beta* (all factors right of the abscissa).  Refuses arithmetic
    laws (complex roots of phi = 1 on the critical line would contribute
    oscillatory terms) and beta = beta* (pole of the gamma factor).
    """
    if law.arithmetic:
        raise ArithmeticLaw(f"{law.kind}: coefficient formula needs a nonarithmetic law")
    bs = beta_star_of(law)
    z0 = (complex(beta) - bs) / alpha
    if z0.imag == 0 and abs(z0.real - round(z0.real)) < 1e-9 and round(z0.real) <= 0:
        n = -int(round(z0.real))
        if n == 0:
            raise PoleError("beta = beta*: gamma-factor pole (m(t, beta*) is constant 1)")
        # singular beta = beta* - alpha n: the series is a degree-n polynomial
        # with leading term (-t)^n g(n, beta)/n!, so the poles of the gamma
        # factor and of the extrapolated product cancel to this finite value
        val = (-1) ** n * gamma_n(law, n, beta, alpha) / math.factorial(n)
        if precision_bits:
            with mp.workprec(precision_bits):
                g = mp.mpf(1)
                bm = mp.mpmathify(beta)
                for k in range(n):
                    g *= 1 - law.phi_mp(bm + mp.mpmathify(alpha) * k)
                return (-1) ** n * g / mp.factorial(n)
        return _tidy_complex(val)
    g = gamma_z(law, _tidy_complex(z0), alpha + bs, alpha, tol=tol,
                precision_bits=precision_bits)
    if precision_bits:
        with mp.workprec(precision_bits):
            psi_b = 1 - law.phi_mp(mp.mpmathify(beta))
            dpsi = _psi_prime_mp(law, bs)
            return mp.gamma(mp.mpmathify(_tidy_complex(z0))) * psi_b / (alpha * dpsi) / g.value
    val = special.gamma(z0) * law.psi(beta) / (alpha * law.psi_prime(bs)) / g.value
    return _tidy_complex(val)


def _psi_prime_mp(law, beta, h=None):
    return -mp.diff(lambda b: law.phi_mp(b), mp.mpmathify(beta))


def rho_moment(law, k, alpha, beta_star=None):
    """k-th power moment of the limit measure: int x^(alpha k) rho(dx).

    Equals (k-1)!/(alpha psi'(beta*)) * prod_{j=1}^{k-1} 1/psi(beta* + alpha j).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    bs = beta_star_of(law) if beta_star is None else beta_star
    dpsi = law.psi_prime(bs)
    if not (math.isfinite(dpsi) and dpsi > 0):
        raise DomainError(f"psi'(beta*) = {dpsi}: moments need a finite positive slope")
    out = math.factorial(k - 1) / (alpha * dpsi)
    for j in range(1, k):
        out /= law.psi(bs + alpha * j)
    return out


@dataclass
class RhoMoments:
    """Moment sequence of the limit measure rho (k = 1..len(moments))."""

    alpha: float
    beta_star: float
    moments: list

    def log_convex(self):
        """Cauchy-Schwarz: m_k^2 <= m_{k-1} m_{k+1} with m_0 = 1."""
        seq = [1.0] + list(self.moments)
        return all(
            seq[k] ** 2 <= seq[k - 1] * seq[k + 1] * (1 + 1e-12)
            for k in range(1, len(seq) - 1)
        )


def rho_moments(law, k_max, alpha):
    bs = beta_star_of(law)
    return RhoMoments(alpha, bs, [rho_moment(law, k, alpha, bs) for k in range(1, k_max + 1)])


# ---------------------------------------------------------------------------
# power-density closed forms
# ---------------------------------------------------------------------------

def filippov_rho_density(lam, theta, alpha, x):
    """Limit density alpha x^(lam-1) e^(-x^alpha) / Gamma(lam/alpha) on x > 0.

    The moments int x^(alpha k) rho(dx) = (lam/alpha)_k identify rho as the
    law of G^(1/alpha) with G ~ Gamma(lam/alpha, 1).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = alpha * x[pos] ** (lam - 1.0) * np.exp(-x[pos] ** alpha) / special.gamma(lam / alpha)
    return out if out.shape else float(out)


def filippov_rho_cdf(lam, theta, alpha, x):
    x = np.asarray(x, dtype=float)
    out = special.gammainc(lam / alpha, np.clip(x, 0.0, None) ** alpha)
    return out if out.shape else float(out)


def filippov_gamma_closed_form(z, beta, lam, theta, alpha=1.0):
    """Gamma-ratio form of g(z, beta) for the power-density law.

    With a = (beta - beta*)/alpha and b = (beta + theta)/alpha the telescoping
    product collapses to Gamma(a+z) Gamma(b) / (Gamma(a) Gamma(b+z)).
    """
    bs = lam - theta
    a = (beta - bs) / alpha
    b = (beta + theta) / alpha
    return _tidy_complex(
        special.gamma(a + z) * special.gamma(b) / (special.gamma(a) * special.gamma(b + z))
    )


def filippov_asymptotic_coefficient(lam, theta, alpha, beta):
    """Closed form of C(beta) for the power-density law: Gamma((beta+theta)/alpha)/Gamma(lam/alpha)."""
    return _tidy_complex(special.gamma((beta + theta) / alpha) / special.gamma(lam / alpha))


# ---------------------------------------------------------------------------
# Dirichlet polynomials (alpha = 1 normalisation)
# ---------------------------------------------------------------------------

def dirichlet_roots(terms):
    """All p roots of phi(beta) = sum_j lam_j/(theta_j + beta) = 1.

    Clears denominators to the monic degree-p polynomial
    prod_j (beta + theta_j) - sum_j lam_j prod_{i != j} (beta + theta_i),
    takes companion-matrix eigenvalues and polishes with Newton.  The root
    with the largest real part is the Malthusian exponent.
    """
    P = np.polynomial.Polynomial
    terms = [(float(l), float(t)) for l, t in terms]
    full = P.fromroots([-t for _, t in terms])
    num = full.copy()
    for j, (l, _) in enumerate(terms):
        others = [-t for i, (_, t) in enumerate(terms) if i != j]
        num = num - l * (P.fromroots(others) if others else P([1.0]))
    roots = num.roots()
    dnum = num.deriv()
    polished = []
    for r in roots:
        x = r
        for _ in range(50):
            fx = num(x)
            dfx = dnum(x)
            if dfx == 0:
                break
            step = fx / dfx
            x = x - step
            if abs(step) <= 1e-15 * max(1.0, abs(x)):
                break
        else:
            raise RootFindingFailure(f"Newton did not converge from root estimate {r}")
        polished.append(x)
    polished = np.array(polished)
    scale = 1.0 + np.max(np.abs(polished))
    for i in range(len(polished)):
        for j in range(i + 1, len(polished)):
            if abs(polished[i] - polished[j]) < 1e-8 * scale:
                raise RootFindingFailure("roots not simple/isolated")
    order = np.argsort(-polished.real)
    return polished[order]


def _dirichlet_beta_star(roots, terms):
    b1 = roots[0]
    if abs(b1.imag) > 1e-9:
        raise RootFindingFailure(f"rightmost root {b1} is not real")
    if b1.real <= -min(t for _, t in terms):
        raise RootFindingFailure("rightmost root left of the abscissa")
    return b1.real


def hypergeometric_coefficient(terms, beta):
    """Leading asymptotic coefficient for a Dirichlet-polynomial law, alpha = 1.

    c(beta) = prod_{j>=2} Gamma(beta*-beta_j)/Gamma(beta-beta_j)
              * prod_j Gamma(beta+theta_j)/Gamma(beta*+theta_j),
    the beta_j running over all roots of phi = 1 (beta_1 = beta*), so that
    m(t, beta) ~ c(beta) t^(beta* - beta).  Agrees with asymptotic_coefficient
    evaluated on the same law.
    """
    roots = dirichlet_roots(terms)
    bs = _dirichlet_beta_star(roots, terms)
    val = 1.0 + 0.0j
    for bj in roots[1:]:
        val *= special.gamma(bs - bj) / special.gamma(beta - bj)
    for _, th in terms:
        val *= special.gamma(beta + th) / special.gamma(bs + th)
    if not np.isfinite(val.real):
        raise PoleError("gamma factor hit a pole")
    out = _tidy_complex(val)
    if isinstance(out, complex) and abs(out.imag) < 1e-10 * max(1.0, abs(out.real)):
        out = out.real
    return out


def dirichlet_psi_prime_at_root(terms, beta_star):
    """psi'(beta*) = sum_j lam_j/(beta* + theta_j)^2."""
    return sum(l / (beta_star + t) ** 2 for l, t in terms)


def _pochhammer(x, n):
    out = 1.0 + 0.0j if isinstance(x, complex) else 1.0
    for i in range(n):
        out = out * (x + i)
    return out


def dirichlet_integer_moment(terms, k):
    """Integer moments of rho for a Dirichlet-polynomial law, alpha = 1:

    (k-1)!/psi'(beta*) * prod_j (beta*+1+theta_j)_{k-1} / (beta*+1-beta_j)_{k-1},
    the denominator product running over all p roots (the beta_1 = beta* factor
    contributes (1)_{k-1} = (k-1)!).
    """
    roots = dirichlet_roots(terms)
    bs = _dirichlet_beta_star(roots, terms)
    val = math.factorial(k - 1) / dirichlet_psi_prime_at_root(terms, bs)
    for _, th in terms:
        val = val * _pochhammer(bs + 1.0 + th, k - 1)
    for bj in roots:
        val = val / _pochhammer(complex(bs) + 1.0 - bj, k - 1)
    val = complex(val)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise RootFindingFailure(f"moment not real: {val}")
    return val.real


# ---------------------------------------------------------------------------
# homogeneous case and tagged-moment consistency
# ---------------------------------------------------------------------------

def homogeneous_m(law, t, beta):
    """alpha = 0: g(n, beta) = psi(beta)^n, so m(t, beta) = exp(-t psi(beta))."""
    val = np.exp(-t * law.psi(beta))
    return _tidy_complex(val) if isinstance(val, complex) else float(val)


def y_moments_consistency(law, alpha, k_max, beta_star=None):
    """Check that the tagged-fragment moment formula reproduces rho's moments.

    The tagged chain shrinks by factors eta ~ sigma_hat with
    psi_hat(z) = psi(z + beta*), and its limit variable Y has
    E Y^k = (k-1)!/(alpha psi_hat'(0)) prod_{j<k} 1/psi_hat(alpha j),
    which must coincide with rho_moment(k) since rho is the law of Y^(1/alpha).
    Returns a dict of residuals.
    """
    bs = beta_star_of(law) if beta_star is None else beta_star
    tagged = law.tagged(bs)

    hat_prime = _fd_derivative_right(lambda zz: tagged.psi_hat(zz), 0.0)
    direct = law.psi_prime(bs)
    rep = {
        "psi_hat_prime0_vs_psi_prime": abs(hat_prime - direct) / abs(direct),
        "pointwise_max": max(
            abs(tagged.psi_hat(z) - law.psi(z + bs)) for z in np.linspace(0.1, 2.5, 7)
        ),
    }
    worst = 0.0
    for k in range(1, k_max + 1):
        val = math.factorial(k - 1) / (alpha * direct)
        for j in range(1, k):
            val /= tagged.psi_hat(alpha * j)
        ref = rho_moment(law, k, alpha, bs)
        worst = max(worst, abs(val - ref) / abs(ref))
    rep["moments_max_rel"] = worst
    rep["ok"] = worst < 1e-10 and rep["psi_hat_prime0_vs_psi_prime"] < 1e-6
    return rep


def _fd_derivative_right(f, x0, h0=1e-4):
    prev = None
    h = h0
    for _ in range(10):
        d = (-3 * f(x0) + 4 * f(x0 + h) - f(x0 + 2 * h)) / (2 * h)
        if prev is not None and abs(d - prev) < 1e-9 * max(1.0, abs(d)):
            return d
        prev = d
        h /= 4
    return prev
