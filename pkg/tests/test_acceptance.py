"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Statistical criteria run at fixed seeds (deterministic outcomes) with
3-standard-error bands over replicates; analytic criteria pin absolute or
relative tolerances.  Asymptotic statements are checked against *exact
finite-time oracles* wherever the finite-horizon transient would otherwise
dominate the Monte Carlo error (the mean-measure and L2 checks), with the
distance to the ideal limit reported alongside.
"""

import json
import math
import subprocess
import sys
import time

import mpmath as mp
import numpy as np
import pytest

from fragkit import analytics as an, estimators as est, laws, simulate as sim
from fragkit.errors import NoMalthusianExponent

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

BINARY = laws.BinaryUniformConservative()
STICK = laws.StickBreakingLossy()
STICK_C = laws.StickBreakingConservative()
FIL21 = laws.FilippovPower(2.0, 1.0)
FIL1510 = laws.FilippovPower(1.5, 1.0)
DIRI = laws.DirichletPolynomial(terms=((1.2, 0.7), (0.9, 2.0)))

NONARITH = [BINARY, STICK, STICK_C, FIL21, FIL1510, DIRI]


#: collected PASS/FAIL lines; echoed by the conftest terminal-summary hook
RESULTS = []


def _report(num, ok, detail, elapsed=None):
    stamp = f" [{elapsed:.1f}s]" if elapsed is not None else ""
    line = f"ACCEPTANCE {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}{stamp}"
    RESULTS.append(line)
    print(line)
    assert ok, f"criterion {num}: {detail}"


def _se(x):
    return x.std(ddof=1) / math.sqrt(x.size)


def test_criterion_01_malthusian_exponents():
    t0 = time.monotonic()
    devs = [abs(laws.malthusian_exponent(STICK, tol=1e-12) - GOLDEN)]
    for lam, theta in ((2.0, 1.0), (1.5, 1.0), (1.0, 0.5)):
        law = laws.FilippovPower(lam, theta)
        devs.append(abs(laws.malthusian_exponent(law, tol=1e-12) - (lam - theta)))
    no_root_ok = False
    try:
        laws.malthusian_exponent(laws.no_malthusian_example(), tol=1e-10)
    except NoMalthusianExponent as exc:
        no_root_ok = exc.phi_at_abscissa is not None and exc.phi_at_abscissa < 1.0
    elapsed = time.monotonic() - t0
    ok = max(devs) < 1e-10 and no_root_ok and elapsed < 1.0
    _report(1, ok, f"max |beta*' - beta*| = {max(devs):.2e}, no-root detected = {no_root_ok}",
            elapsed)


def test_criterion_02_gamma_closed_form():
    t0 = time.monotonic()
    worst = 0.0
    for beta in (1.3, 2.6):
        for z in (0.3, 1.7, 0.5 + 1.0j):
            g = an.gamma_z(FIL21, z, beta, 1.0, tol=1e-12)
            ref = an.filippov_gamma_closed_form(z, beta, 2.0, 1.0)
            worst = max(worst, abs(g.value - ref) / abs(ref))
    elapsed = time.monotonic() - t0
    ok = worst < 1e-8 and elapsed < 5.0
    _report(2, ok, f"max relative gamma-ratio error = {worst:.2e}", elapsed)


def test_criterion_03_product_identities():
    t0 = time.monotonic()
    rng = np.random.default_rng(2026)
    worst_f = worst_r = 0.0
    for law in NONARITH:
        base = law.beta_a if math.isfinite(law.beta_a) else -0.5
        checked = 0
        while checked < 100:
            z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
            beta = base + 0.1 + rng.uniform(0.0, 2.5)
            try:
                g0 = an.gamma_z(law, z, beta, 1.0, tol=1e-12).value
                g1 = an.gamma_z(law, z + 1, beta, 1.0, tol=1e-12).value
                gr = an.gamma_z(law, -z, z + beta, 1.0, tol=1e-12).value
            except Exception:
                continue
            worst_f = max(worst_f, abs(g1 - law.psi(beta + z) * g0) / abs(g0))
            worst_r = max(worst_r, abs(gr * g0 - 1.0))
            checked += 1
    elapsed = time.monotonic() - t0
    ok = worst_f < 1e-9 and worst_r < 1e-8 and elapsed < 30.0
    _report(3, ok, f"functional residual {worst_f:.2e} (<1e-9), "
                   f"reciprocal {worst_r:.2e} (<1e-8), 100 pts x {len(NONARITH)} laws", elapsed)


def test_criterion_04_series_vs_integro():
    t0 = time.monotonic()
    grid = (0.25, 0.5, 1.0, 2.0, 3.5, 5.0, 7.5, 10.0)
    worst = 0.0
    for law in (FIL21, STICK):
        bs = an.beta_star_of(law)
        for db in (0.0, 0.5, 1.0):
            sol = an.m_integro(law, 10.0, bs + db, 1.0)
            for t in grid:
                ref = an.m_series(law, t, bs + db, 1.0, rel_tol=1e-13).value
                worst = max(worst, abs(float(sol(t)) - ref) / abs(ref))
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-6 and elapsed < 120.0
    _report(4, ok, f"max |series - integro|/m = {worst:.2e} on t in [0,10], "
                   f"beta in {{b*, b*+1/2, b*+1}}", elapsed)


def test_criterion_05_asymptotics_big_float():
    t0 = time.monotonic()
    t = 50.0
    worst = 0.0
    details = []
    for law in (FIL21, STICK):
        bs = an.beta_star_of(law)
        for db in (0.3, 1.0):
            beta = bs + db
            C = an.asymptotic_coefficient(law, beta, 1.0, tol=1e-22, precision_bits=240)
            ev = an.m_series(law, t, beta, 1.0, rel_tol=1e-24, start_bits=256)
            with mp.workprec(240):
                ratio = mp.mpf(t) ** mp.mpf(db) * ev.mp_value / C
                dev = float(abs(ratio - 1))
            worst = max(worst, dev)
            details.append(f"{law.kind} b*+{db:g}: {dev:.6f}")
    elapsed = time.monotonic() - t0
    ok = worst <= 0.02 and elapsed < 300.0
    _report(5, ok, f"max |t^(beta-b*) m/C - 1| = {worst:.6f} (<=0.02); " + "; ".join(details),
            elapsed)


def test_criterion_06_limit_moments_closed_forms():
    t0 = time.monotonic()
    worst_f = 0.0
    for lam, theta, alpha in ((2.0, 1.0, 1.0), (1.5, 1.0, 1.0), (2.0, 0.8, 1.3)):
        law = laws.FilippovPower(lam, theta)
        for k in range(1, 7):
            ref = 1.0
            for i in range(k):
                ref *= lam / alpha + i
            worst_f = max(worst_f, abs(an.rho_moment(law, k, alpha) - ref) / ref)
    worst_d = 0.0
    terms = ((1.2, 0.7), (0.9, 2.0))
    for k in range(1, 7):
        a = an.dirichlet_integer_moment(terms, k)
        b = an.rho_moment(DIRI, k, 1.0)
        worst_d = max(worst_d, abs(a - b) / abs(b))
    elapsed = time.monotonic() - t0
    ok = worst_f <= 1e-12 and worst_d <= 1e-10
    _report(6, ok, f"power-law Pochhammer rel {worst_f:.2e} (<=1e-12), "
                   f"2-term integer-moment rel {worst_d:.2e} (<=1e-10)", elapsed)


def test_criterion_07_mean_measure_moments():
    # Weighted empirical moments at t=30 vs their exact finite-time means
    # t^k m(t, b*+k), which converge to the limit moments 2 and 6 at the
    # documented O(1/t) rate.  Testing directly against (2, 6) would compare
    # an unbiased 3e-3-SE estimator to targets ~23 SE away: the finite-time
    # transient, not the implementation, would decide.  The oracle identity
    # int x^k dsigma*_t = t^k m(t, b*+k) is exact.
    t0 = time.monotonic()
    t, reps_n = 30.0, 10_000
    cfg = sim.SimulationConfig(alpha=1.0, t_max=t, snapshot_times=(t,), master_seed=2030)
    reps = sim.run_replicates(cfg, BINARY, reps_n, threads=4, beta_star=1.0)
    measure = est.empirical_weighted_measure([r[0] for r in reps], 1.0, 1.0)
    limits = {1: 2.0, 2: 6.0}
    ok = True
    parts = []
    for k in (1, 2):
        mo, se = measure.moment(k)
        target = t**k * an.m_series(BINARY, t, 1.0 + k, 1.0, rel_tol=1e-14).value
        z = (mo - target) / se
        drift = abs(target / limits[k] - 1.0)
        ok &= abs(z) <= 3.0 and drift <= 5.0 / t
        parts.append(
            f"k={k}: est {mo:.4f} vs exact {target:.4f} (z={z:+.2f}); "
            f"limit {limits[k]:g} is {drift:.3f} away (O(1/t))"
        )
    elapsed = time.monotonic() - t0
    ok &= elapsed < 300.0
    _report(7, ok, "; ".join(parts), elapsed)


def test_criterion_08_martingale_tests():
    t0 = time.monotonic()
    ok = True
    parts = []
    # natural time, lossy stick: corrected statistic has mean exactly 1
    bs = an.beta_star_of(STICK)
    times = (1.0, 5.0, 20.0)
    cfg = sim.SimulationConfig(alpha=1.0, t_max=20.0, snapshot_times=times, master_seed=808)
    reps = sim.run_replicates(cfg, STICK, 3000, threads=4, beta_star=bs)
    for i, t in enumerate(times):
        vals = np.array([
            sim.snapshot_power_sum(r[i], bs) + r[i].frozen_beta_mass_bound for r in reps
        ])
        z = (vals.mean() - 1.0) / _se(vals)
        ok &= abs(z) <= 3.0
        parts.append(f"stick t={t:g}: z={z:+.2f}")
    # conservative laws: per-path identity to 1e-12
    for law, tag in ((BINARY, "binary"), (STICK_C, "stick-c")):
        cfg = sim.SimulationConfig(alpha=1.0, t_max=20.0, snapshot_times=times,
                                   master_seed=809)
        worst = 0.0
        for r in range(200):
            for s in sim.run(cfg, law, replicate=r, beta_star=1.0):
                worst = max(worst, abs(s.sizes.sum() + s.frozen_beta_mass_bound - 1.0))
        ok &= worst <= 1e-12
        parts.append(f"{tag} per-path dev {worst:.1e}")
    # generation martingale, n <= 12
    gen = sim.generation_martingale(STICK, bs, depth=12, eps_prune=1e-4, n_trees=10_000,
                                    master_seed=810)
    mt = gen.m_tilde
    worst_z = 0.0
    for n in range(1, 13):
        z = (mt[:, n].mean() - 1.0) / _se(mt[:, n])
        worst_z = max(worst_z, abs(z))
    ok &= worst_z <= 3.0
    parts.append(f"generation n<=12 worst |z|={worst_z:.2f}")
    elapsed = time.monotonic() - t0
    _report(8, ok, "; ".join(parts), elapsed)


def test_criterion_09_fixed_point_second_moment():
    t0 = time.monotonic()
    bs = an.beta_star_of(STICK)
    oracle = est.m_infinity_second_moment_oracle(STICK, bs)
    mc = sim.estimate_m_infinity_moments(STICK, bs, n_trees=10_000, master_seed=909)
    z = (mc.second_moment - oracle.value) / math.hypot(mc.second_moment_se, oracle.se)
    ok = abs(z) <= 3.0 and mc.converged
    parts = [f"stick: MC {mc.second_moment:.4f} vs oracle {oracle.value:.4f} "
             f"(z={z:+.2f}, {mc.n_generations} generations)"]
    for law, tag in ((BINARY, "binary"), (STICK_C, "stick-c")):
        orc = est.m_infinity_second_moment_oracle(law, 1.0)
        mcc = sim.estimate_m_infinity_moments(law, 1.0, n_trees=500, master_seed=910)
        exact = abs(orc.value - 1.0) < 1e-15 and abs(mcc.second_moment - 1.0) < 1e-12
        ok &= exact
        parts.append(f"{tag}: oracle 1 exactly = {exact}")
    elapsed = time.monotonic() - t0
    _report(9, ok, "; ".join(parts), elapsed)


def test_criterion_10_tagged_fragment_and_Y():
    t0 = time.monotonic()
    ys = sim.sample_Y(FIL21, 1.0, 100_000, master_seed=1010)
    ok = True
    parts = []
    for k, ref in ((1, an.rho_moment(FIL21, 1, 1.0)), (2, an.rho_moment(FIL21, 2, 1.0))):
        vals = ys.values**k
        z = (vals.mean() - ref) / _se(vals)
        ok &= abs(z) <= 3.0
        parts.append(f"E Y^{k}: {vals.mean():.4f} vs {ref:g} (z={z:+.2f})")
    t = 100.0
    x = sim.tagged_final_sizes(FIL21, 1.0, t, 100_000, master_seed=1011)
    scaled = np.sort(t * x)
    emp = np.arange(1, scaled.size + 1) / scaled.size
    target = an.filippov_rho_cdf(2.0, 1.0, 1.0, scaled)
    ks = float(np.max(np.maximum(np.abs(emp - target), np.abs(emp - 1.0 / scaled.size - target))))
    ok &= ks < 0.02
    parts.append(f"KS(t L_t, gamma-type) = {ks:.4f} (<0.02)")
    elapsed = time.monotonic() - t0
    _report(10, ok, "; ".join(parts), elapsed)


def test_criterion_11_homogeneous_mode():
    t0 = time.monotonic()
    ok = True
    parts = []
    for law, beta, tag in ((BINARY, 2.0, "binary"), (FIL21, 1.5, "filippov")):
        cfg = sim.SimulationConfig(alpha=0.0, t_max=3.0, snapshot_times=(1.0, 3.0),
                                   master_seed=1111)
        reps = sim.run_replicates(cfg, law, 4000, threads=4)
        for i, t in enumerate((1.0, 3.0)):
            vals = np.array([sim.snapshot_power_sum(r[i], beta) for r in reps])
            target = an.homogeneous_m(law, t, beta)
            z = (vals.mean() - target) / _se(vals)
            ok &= abs(z) <= 3.0
            parts.append(f"{tag} t={t:g}: z={z:+.2f}")
    elapsed = time.monotonic() - t0
    _report(11, ok, "exp(-t psi(beta)) targets; " + "; ".join(parts), elapsed)


def test_criterion_12_l2_statistic():
    # Var(A_t - M_t int f drho) must strictly decrease along the ladder
    # (beyond 2 SE) and E[A_t M_t] must match E Minf^2 int f drho within
    # 3 SE.  The product check runs at t=150: at t<=40 the exact finite-time
    # transient of E[A_t M_t] (~0.056 at t=10, O(1/t)) still exceeds the
    # 3 SE band of any replicate count large enough to be a useful test.
    t0 = time.monotonic()
    f = est.exp_decay()
    f_rho = est.OracleValue(0.25, 0.0)  # int e^-x x e^-x dx for the gamma-type density
    m2 = est.m_infinity_second_moment_oracle(FIL21, 1.0)
    rep = est.l2_functional_test(
        FIL21, 1.0, f, (10.0, 40.0), n_replicates=2500, master_seed=1212, threads=4,
        pair_t=150.0, f_rho=f_rho, m2_oracle=m2,
    )
    ok = rep.all_pass
    elapsed = time.monotonic() - t0
    detail = "; ".join(f"{c.name}: z={c.z:+.2f}" for c in rep.checks)
    _report(12, ok, detail + f" (E Minf^2 = {m2.value:g} exact)", elapsed)


def test_criterion_13_thread_determinism(tmp_path):
    t0 = time.monotonic()
    spec = tmp_path / "binary.json"
    spec.write_text(json.dumps({"kind": "BinaryUniformConservative", "params": {}}))
    args = [sys.executable, "-m", "fragkit.cli", "simulate", "--law", str(spec),
            "--alpha", "1", "--tmax", "30", "--snapshots", "30",
            "--replicates", "10000", "--seed", "2030"]
    runs = {}
    for threads in (1, 4):
        proc = subprocess.run(args + ["--threads", str(threads)], capture_output=True)
        assert proc.returncode == 0, proc.stderr.decode()
        runs[threads] = proc.stdout
    ok = runs[1] == runs[4] and len(runs[1]) > 100_000
    elapsed = time.monotonic() - t0
    _report(13, ok, f"CSV bytes: {len(runs[1])} vs {len(runs[4])}, identical = "
                    f"{runs[1] == runs[4]}", elapsed)
