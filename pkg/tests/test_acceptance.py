"""Acceptance suite: one test per shipped acceptance criterion.

Each test states its numeric target and tolerance inline and carries
the measured values in its assertion messages, so a -v run reads as a
criterion-by-criterion scorecard.  Known gap: criterion 5 checks that
the 40 km and 140 km deviation curves stay within 2 percentage points
of each other for both bounds; the e1 side measures ~2.23 pp at
nu/mu = 0.25 and that sub-assertion fails.  The computation is left
as-is rather than widened to pass.
"""

import math
import time

import numpy as np
import pytest

from decoyqkd.bounds import (
    ProtocolIntensities,
    adversary_oracle,
    asymptotic_bounds,
    deviation_report,
    error_gain_slope,
    scaled_error_gain,
    scaled_gain,
    two_decoy_bounds,
    vacuum_weak_bounds,
    wang_delta,
    y1_bound_gap,
)
from decoyqkd.fluct import max_distance_fluct, optimize_allocation, scan_distance_fluct
from decoyqkd.model import E0, GYS, KTH, simulate_observations, transmittance
from decoyqkd.numerics import finite_difference
from decoyqkd.rate import (
    asymptotic_rate,
    max_secure_distance,
    optimal_mu,
    optimal_mu_wang,
    vacuum_weak_rate,
    wang_asymptotic_rate,
)


def distance_of(rate_fn):
    d = max_secure_distance(rate_fn)
    assert d is not None
    return d


def test_criterion_01_optimal_signal_intensity():
    t0 = time.perf_counter()
    mu_ideal = optimal_mu(GYS, f_ec=1.0)
    mu_real = optimal_mu(GYS)
    elapsed = time.perf_counter() - t0
    assert mu_ideal == pytest.approx(0.54, abs=0.01), f"measured {mu_ideal:.4f}"
    assert mu_real == pytest.approx(0.48, abs=0.01), f"measured {mu_real:.4f}"
    assert elapsed < 1.0, f"took {elapsed:.3f} s"


def test_criterion_02_asymptotic_max_distance():
    d = distance_of(
        lambda l: asymptotic_rate(GYS, transmittance(GYS, l).eta, 0.48)
    )
    assert d == pytest.approx(142.05, abs=0.5), f"measured {d:.2f} km"


def test_criterion_03_vacuum_weak_max_distance():
    d = distance_of(
        lambda l: vacuum_weak_rate(GYS, transmittance(GYS, l).eta, 0.48, 0.05)
    )
    assert d == pytest.approx(140.55, abs=0.5), f"measured {d:.2f} km"


def test_criterion_04_tagged_fraction_max_distance():
    d = distance_of(
        lambda l: wang_asymptotic_rate(GYS, transmittance(GYS, l).eta, 0.30)
    )
    assert d == pytest.approx(128.55, abs=0.5), f"measured {d:.2f} km"
    mu_best = optimal_mu_wang(GYS)
    assert 0.25 <= mu_best <= 0.30, f"measured optimum {mu_best:.4f}"


def test_criterion_05_deviation_levels_and_distance_stability():
    mu = 0.48
    nu = 0.25 * mu
    devs = {}
    for length in (40.0, 140.0):
        eta = transmittance(GYS, length).eta
        est = vacuum_weak_bounds(
            simulate_observations(GYS, eta, (mu, nu, 0.0)), mu, nu
        )
        devs[length] = deviation_report(est, asymptotic_bounds(GYS, eta, mu))
    b_y1 = 100.0 * devs[40.0].beta_y1
    b_e1 = 100.0 * devs[40.0].beta_e1
    gap_y1 = abs(b_y1 - 100.0 * devs[140.0].beta_y1)
    gap_e1 = abs(b_e1 - 100.0 * devs[140.0].beta_e1)
    assert b_y1 == pytest.approx(3.5, abs=0.5), f"measured {b_y1:.3f}%"
    assert b_e1 == pytest.approx(16.8, abs=1.0), f"measured {b_e1:.3f}%"
    assert gap_y1 < 2.0, f"Y1 deviation gap 40 vs 140 km = {gap_y1:.3f} pp"
    # known failure: measured ~2.23 pp; the gap falls below 2 pp only
    # for nu/mu <= ~0.22, not at the stated 0.25 operating point
    assert gap_e1 < 2.0, (
        f"e1 deviation gap 40 vs 140 km = {gap_e1:.3f} pp (target < 2 pp); "
        f"passing sub-checks: beta_y1 = {b_y1:.3f}%, beta_e1 = {b_e1:.3f}%, "
        f"Y1 gap = {gap_y1:.3f} pp"
    )


def test_criterion_06_finite_statistics_scan():
    mu = optimal_mu(GYS)
    n = 6.0e9
    lengths = [4.0 * i for i in range(1, 31)]

    t0 = time.perf_counter()
    points = scan_distance_fluct(GYS, mu, n, lengths)
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0, f"30-point grid took {elapsed:.1f} s"

    d_vw = max_distance_fluct(GYS, mu, n)
    assert d_vw == pytest.approx(125.0, abs=3.0), f"measured {d_vw:.2f} km"
    d_one = max_distance_fluct(GYS, mu, n, estimator="one-decoy")
    assert d_one == pytest.approx(122.0, abs=3.0), f"measured {d_one:.2f} km"

    by_length = {p.length_km: p for p in points}
    nu_short = by_length[4.0].nu
    assert nu_short == pytest.approx(0.04, abs=0.02), f"measured {nu_short:.4f}"
    assert by_length[100.0].nu > by_length[20.0].nu > 0.0, (
        f"nu(20 km) = {by_length[20.0].nu:.4f}, nu(100 km) = {by_length[100.0].nu:.4f}"
    )

    # the vacuum decoy earns pulses only beyond its activation distance
    active = [p.length_km for p in points if p.n_decoy2 > 1e-3 * n]
    idle = [p.length_km for p in points if p.n_decoy2 <= 1e-3 * n]
    assert active, "vacuum decoy never activated"
    activation = 0.5 * (max(idle) + min(active)) if idle else min(active)
    assert activation == pytest.approx(82.0, abs=8.0), f"measured {activation:.1f} km"


def test_criterion_07_allocation_report_103km():
    eta = transmittance(GYS, 103.62).eta
    res = optimize_allocation(GYS, eta, optimal_mu(GYS), 6.0e9, u_alpha=10.0)
    nu = res.nu
    signal_fraction = res.alloc.n_signal / res.alloc.n_total
    key_bits = res.result.key_bits_lower
    b_y1 = 100.0 * res.result.beta_y1
    assert nu == pytest.approx(0.127, abs=0.015), f"measured {nu:.4f}"
    assert signal_fraction == pytest.approx(0.66, abs=0.05), f"measured {signal_fraction:.4f}"
    assert 2.17e4 / 1.5 <= key_bits <= 2.17e4 * 1.5, f"measured {key_bits:.3e} bits"
    assert b_y1 == pytest.approx(7.09, abs=2.0), f"measured {b_y1:.2f}%"


def test_criterion_08_large_budget_scan():
    d = max_distance_fluct(GYS, optimal_mu(GYS), 8.4e10)
    assert d == pytest.approx(132.0, abs=3.0), f"measured {d:.2f} km"
    assert d > 128.55


def test_criterion_09_second_parameter_set():
    mu = optimal_mu(KTH)
    d_perfect = distance_of(
        lambda l: asymptotic_rate(KTH, transmittance(KTH, l).eta, mu)
    )
    assert d_perfect == pytest.approx(68.6, abs=0.5), f"measured {d_perfect:.2f} km"
    d_fluct = max_distance_fluct(KTH, mu, 8.4e10)
    assert d_fluct == pytest.approx(67.2, abs=1.5), f"measured {d_fluct:.2f} km"
    d_wang = distance_of(
        lambda l: wang_asymptotic_rate(KTH, transmittance(KTH, l).eta, 0.43)
    )
    assert d_wang == pytest.approx(55.5, abs=0.5), f"measured {d_wang:.2f} km"


# --- criterion 10: property suites ---------------------------------------


def random_operating_points(seed, count):
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < count:
        length = rng.uniform(5.0, 120.0)
        mu = rng.uniform(0.3, 0.7)
        nu1 = mu * rng.uniform(0.1, 0.3)
        nu2 = nu1 * rng.uniform(0.0, 0.8) if rng.random() > 0.3 else 0.0
        if nu1 + nu2 >= mu or nu2 >= nu1:
            continue
        points.append((length, mu, nu1, nu2))
    return points


def test_criterion_10a_bounds_sound_against_adversary_oracle():
    # the oracle's LP window (solver tolerance plus truncated Poisson
    # tail) allows it to dip a hair below the analytic bound, hence the
    # 1e-4 relative slack on the comparisons
    for length, mu, nu1, nu2 in random_operating_points(seed=424, count=25):
        eta = transmittance(GYS, length).eta
        ints = ProtocolIntensities(mu=mu, nu1=nu1, nu2=nu2)
        obs = simulate_observations(GYS, eta, ints)
        est = two_decoy_bounds(obs, ints)
        res = adversary_oracle(obs, ints)
        label = f"l={length:.1f} mu={mu:.3f} nu1={nu1:.3f} nu2={nu2:.3f}"
        assert res.feasible, label
        assert est.y1_lower <= res.y1_min * (1.0 + 1e-4) + 1e-12, label
        assert est.e1_upper >= res.e1_max * (1.0 - 1e-4), label


def test_criterion_10b_weakest_decoy_monotonicity():
    # raising nu2 with everything else fixed never improves either bound
    rng = np.random.default_rng(77)
    for _ in range(10):
        length = rng.uniform(5.0, 110.0)
        mu = rng.uniform(0.35, 0.7)
        nu1 = mu * rng.uniform(0.12, 0.25)
        eta = transmittance(GYS, length).eta
        y1_prev, e1_prev = math.inf, -math.inf
        for nu2 in np.linspace(0.0, 0.9 * nu1, 7):
            ints = ProtocolIntensities(mu=mu, nu1=nu1, nu2=float(nu2))
            est = two_decoy_bounds(simulate_observations(GYS, eta, ints), ints)
            assert est.y1_lower <= y1_prev * (1.0 + 1e-12)
            assert est.e1_upper >= e1_prev * (1.0 - 1e-12)
            y1_prev, e1_prev = est.y1_lower, est.e1_upper


def test_criterion_10c_gap_and_slope_monotone():
    mu, nu1 = 0.48, 0.12
    for length in (20.0, 60.0, 100.0):
        eta = transmittance(GYS, length).eta
        grid = np.linspace(0.0, 0.9 * nu1, 12)
        gaps = [y1_bound_gap(float(x), mu, nu1, GYS, eta) for x in grid]
        slopes = [error_gain_slope(float(x), mu, nu1, GYS, eta) for x in grid]
        assert all(b >= a for a, b in zip(gaps, gaps[1:]))
        assert all(b >= a for a, b in zip(slopes, slopes[1:]))
        # both scaled observables are nondecreasing in the intensity
        for x in (0.01, 0.1, 0.3, 0.6):
            assert finite_difference(lambda v: scaled_gain(v, GYS, eta), x, 1e-6) >= 0.0
            assert finite_difference(lambda v: scaled_error_gain(v, GYS, eta), x, 1e-6) >= 0.0


def test_criterion_10d_power_sum_inequality():
    # a^i - b^i <= a^2 - b^2 whenever 0 < a+b < 1, a > b >= 0, i >= 2
    rng = np.random.default_rng(2024)
    n = 10_000
    a = rng.uniform(1e-6, 1.0, size=n)
    b = rng.uniform(0.0, 1.0, size=n) * np.minimum(a, 1.0 - a) * (1.0 - 1e-12)
    i = rng.integers(2, 50, size=n)
    lhs = np.power(a, i) - np.power(b, i)
    rhs = a * a - b * b
    assert np.all(lhs <= rhs + 1e-15)


def test_criterion_10e_tagged_fraction_relabeling_identity():
    # the multiphoton-fraction closed form written out with renamed
    # signal/decoy symbols matches the implementation to 1e-12 relative
    rng = np.random.default_rng(55)
    for _ in range(10):
        length = rng.uniform(10.0, 90.0)
        sig = rng.uniform(0.1, 0.5)
        dec = sig + rng.uniform(0.1, 0.5)
        eta = transmittance(GYS, length).eta
        obs = simulate_observations(GYS, eta, (dec, sig, 0.0))
        relabeled = (
            sig / (dec - sig)
            * (sig * math.exp(-sig) * obs.q_mu / (dec * math.exp(-dec) * obs.q_nu1) - 1.0)
            + sig * math.exp(-sig) * obs.q_nu2 / (dec * obs.q_nu1)
        )
        assert wang_delta(obs, dec, sig) == pytest.approx(relabeled, rel=1e-12)


def first_order_deviations(eta, mu, nu):
    """Leading-order deviation predictions for the vacuum+weak bounds."""
    y0 = GYS.y0
    y1 = y0 + eta
    e1 = (E0 * y0 + GYS.e_detector * eta) / y1
    dy = (
        nu / mu * (math.exp(mu) - 1.0 - mu) * eta
        + nu / mu**2 * (math.exp(mu) - 1.0 - mu - mu**2 / 2.0) * y0
    )
    de = dy * e1 / y1 + nu * (e1 - E0 * y0 / (2.0 * y1))
    return dy / y1, de / e1


def test_criterion_10f_first_order_convergence():
    # the leading-order deviation formulas drop O(nu^2) and O(eta)
    # terms, so agreement improves linearly as nu shrinks and bottoms
    # out at the eta floor
    mu = 0.48
    for length in (40.0, 140.0):
        eta = transmittance(GYS, length).eta
        asym = asymptotic_bounds(GYS, eta, mu)
        errors_y, errors_e = [], []
        for nu in (1e-2, 1e-3, 1e-4):
            est = vacuum_weak_bounds(
                simulate_observations(GYS, eta, (mu, nu, 0.0)), mu, nu
            )
            dev = deviation_report(est, asym)
            pred_y, pred_e = first_order_deviations(eta, mu, nu)
            err_y = abs(pred_y / dev.beta_y1 - 1.0)
            err_e = abs(pred_e / dev.beta_e1 - 1.0)
            band = 4.0 * nu + 2.0 * eta
            assert err_y <= band, f"l={length}, nu={nu}: y-ratio error {err_y:.2e}"
            assert err_e <= band, f"l={length}, nu={nu}: e-ratio error {err_e:.2e}"
            errors_y.append(err_y)
            errors_e.append(err_e)
        # strict improvement only shows once the eta floor is negligible;
        # at 40 km the O(nu) and O(eta) residuals partially cancel
        if eta < 1e-3:
            assert errors_y[0] > errors_y[1] > errors_y[2]
            assert errors_e[0] > errors_e[1] > errors_e[2]
