import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iwakf.errors import InsufficientData, RankDeficient
from iwakf.kalman import steady_state
from iwakf.model import (
    LtiSystem,
    augment,
    driving_variance,
    evaluate_transfer,
    make_coloring_filter,
    shaping_filter,
)
from iwakf.whiteness import (
    InnovationsLog,
    PsdCurve,
    autocorr_csv_rows,
    empirical_autocorrelation,
    flatness_ratio,
    innovations_psd_theoretical,
    recover_phi_v,
    welch_psd,
    whiteness_bound,
    whiteness_cost,
)
from conftest import random_stable_gamma


class TestAutocorrelation:
    def test_alternating_sequence_hand_value(self):
        # z = (1,-1,1,-1): mean 0, lag0 = 1, biased lag1 = -3/4
        log = InnovationsLog(np.array([1.0, -1.0, 1.0, -1.0]))
        est = empirical_autocorrelation(log, 1)
        assert est.lag0.item() == pytest.approx(1.0)
        assert est.normalized_scalar(1) == pytest.approx(-0.75)
        assert not est.degenerate

    def test_alternating_sequence_cost(self):
        log = InnovationsLog(np.array([1.0, -1.0, 1.0, -1.0]))
        assert whiteness_cost(log, lags=[1]) == pytest.approx(0.5625)

    def test_degenerate_constant_sequence(self):
        log = InnovationsLog(np.zeros(100))
        est = empirical_autocorrelation(log, 3)
        assert est.degenerate
        assert est.normalized_scalar(2) == 0.0

    def test_mean_removal_matters(self):
        rngl = np.random.default_rng(7)
        z = rngl.normal(size=5000) + 10.0
        with_mean = whiteness_cost(InnovationsLog(z), max_lag=5, remove_mean=False)
        without = whiteness_cost(InnovationsLog(z), max_lag=5, remove_mean=True)
        # large offset dominates the raw estimator, not the centered one
        assert with_mean > 100 * without

    def test_too_short_raises(self):
        with pytest.raises(InsufficientData):
            empirical_autocorrelation(InnovationsLog(np.ones(5)), 5)

    def test_white_noise_within_bartlett(self, rng):
        N = 50_000
        log = InnovationsLog(rng.normal(size=N))
        est = empirical_autocorrelation(log, 10)
        bound = whiteness_bound(N)
        hits = sum(abs(est.normalized_scalar(l)) <= bound for l in range(1, 11))
        assert hits >= 8

    def test_ar1_lag1_matches_theory(self, rng):
        # AR(1) with coefficient a has normalized lag-1 autocorrelation a
        a = 0.6
        N = 200_000
        e = rng.normal(size=N)
        z = np.empty(N)
        z[0] = e[0]
        for k in range(1, N):
            z[k] = a * z[k - 1] + e[k]
        est = empirical_autocorrelation(InnovationsLog(z), 2)
        assert est.normalized_scalar(1) == pytest.approx(a, abs=0.01)
        assert est.normalized_scalar(2) == pytest.approx(a * a, abs=0.01)


class TestBound:
    def test_standard_quantiles(self):
        assert whiteness_bound(10_000, 0.95) == pytest.approx(0.0196, abs=1e-4)
        assert whiteness_bound(40_000, 0.95) == pytest.approx(0.0098, abs=1e-4)
        assert whiteness_bound(10_000, 0.99) == pytest.approx(0.02576, abs=1e-4)

    def test_small_sample_rejected(self):
        with pytest.raises(ValueError):
            whiteness_bound(10)

    def test_bartlett_coverage_monte_carlo(self, rng):
        # ~95% of lag-1 estimates from white noise fall inside the bound
        N, trials = 2000, 400
        bound = whiteness_bound(N)
        inside = 0
        for _ in range(trials):
            z = rng.normal(size=N)
            est = empirical_autocorrelation(InnovationsLog(z), 1)
            inside += abs(est.normalized_scalar(1)) <= bound
        assert 0.90 <= inside / trials <= 0.99


@given(scale=st.floats(1e-3, 1e3))
@settings(max_examples=30, deadline=None)
def test_cost_scale_invariance(scale):
    rngl = np.random.default_rng(99)
    z = rngl.normal(size=2000)
    j1 = whiteness_cost(InnovationsLog(z), max_lag=5)
    j2 = whiteness_cost(InnovationsLog(scale * z), max_lag=5)
    assert j2 == pytest.approx(j1, rel=1e-9)


def test_empty_lag_set_costs_zero():
    assert whiteness_cost(InnovationsLog(np.ones(50) + np.arange(50)), lags=[]) == 0.0


class TestTheoreticalPsd:
    def test_white_noise_gives_flat_spectrum(self, pendulum):
        Q = pendulum.B @ pendulum.B.T
        R = np.array([[0.01]])
        _, K, F = steady_state(pendulum, Q, R)
        curve = innovations_psd_theoretical(pendulum, K, F, R, np.array([[1.0]]))
        assert flatness_ratio(curve) < 1 + 1e-9

    def test_flat_for_random_plants(self, rng):
        for _ in range(10):
            n = rng.integers(1, 4)
            A = rng.normal(size=(n, n))
            A *= rng.uniform(0.3, 0.95) / max(np.abs(np.linalg.eigvals(A)).max(), 1e-9)
            B = rng.normal(size=(n, 1))
            C = rng.normal(size=(1, n))
            sys = LtiSystem(A, B, C)
            R = np.array([[rng.uniform(0.01, 1.0)]])
            qv = rng.uniform(0.1, 2.0)
            _, K, F = steady_state(sys, B @ B.T * qv, R)
            curve = innovations_psd_theoretical(sys, K, F, R, np.array([[qv]]))
            assert flatness_ratio(curve) < 1 + 1e-9

    def test_flat_level_equals_innovation_variance(self, pendulum):
        Q = pendulum.B @ pendulum.B.T * 0.5
        R = np.array([[0.01]])
        P, K, F = steady_state(pendulum, Q, R)
        S = (pendulum.C @ P @ pendulum.C.T + R).item()
        curve = innovations_psd_theoretical(pendulum, K, F, R, np.array([[0.5]]))
        assert np.allclose(curve.scalar(), S, rtol=1e-9)

    def test_mismatched_filter_not_flat(self, pendulum, sf1):
        # gain tuned for white driving noise, but actual noise is colored
        aug = augment(pendulum, sf1)
        sys = LtiSystem(aug.A_aug, aug.B_aug, aug.C_aug)
        R = np.array([[0.01]])
        Q_white = pendulum.B @ pendulum.B.T
        _, K, F = steady_state(pendulum, Q_white, R)
        qw = driving_variance(sf1, 1.0)
        grid = np.linspace(0, np.pi, 256)
        mags = np.array(
            [abs(evaluate_transfer(sf1, np.exp(1j * p))) ** 2 for p in grid]
        )
        phi_v = PsdCurve(grid, qw * mags)
        curve = innovations_psd_theoretical(pendulum, K, F, R, phi_v, grid=grid)
        assert flatness_ratio(curve) > 1.5

    def test_round_trip_recovers_process_noise_psd(self, pendulum, rng):
        R = np.array([[0.01]])
        grid = np.linspace(0, np.pi, 256)
        for _ in range(5):
            f = make_coloring_filter(*random_stable_gamma(rng))
            qw = rng.uniform(0.1, 2.0)
            mags = np.array(
                [abs(evaluate_transfer(f, np.exp(1j * p))) ** 2 for p in grid]
            )
            phi_v_true = PsdCurve(grid, qw * mags)
            Q = pendulum.B @ pendulum.B.T  # deliberately mistuned gain
            _, K, F = steady_state(pendulum, Q, R)
            phi_z = innovations_psd_theoretical(pendulum, K, F, R, phi_v_true, grid)
            rec = recover_phi_v(phi_z, pendulum, K, F, R)
            rms = np.sqrt(np.mean((rec.scalar() - phi_v_true.scalar()) ** 2))
            assert rms < 1e-6

    def test_rank_deficient_channel(self):
        # B = 0: process noise never reaches the innovation
        sys = LtiSystem(np.array([[0.5]]), np.zeros((1, 1)), np.array([[1.0]]))
        R = np.eye(1)
        _, K, F = steady_state(sys, np.zeros((1, 1)), R)
        phi_z = innovations_psd_theoretical(sys, K, F, R, np.array([[0.0]]))
        with pytest.raises(RankDeficient):
            recover_phi_v(phi_z, sys, K, F, R)


class TestWelch:
    def test_white_noise_level(self, rng):
        x = rng.normal(size=200_000)
        curve = welch_psd(x)
        assert np.mean(curve.scalar()) == pytest.approx(1.0, rel=0.05)

    def test_sinusoid_peak_location(self, rng):
        phi0 = 0.9
        k = np.arange(100_000)
        x = np.sin(phi0 * k) + 0.01 * rng.normal(size=k.size)
        curve = welch_psd(x)
        peak = curve.frequencies[np.argmax(curve.scalar())]
        assert peak == pytest.approx(phi0, abs=2 * np.pi / 1024)

    def test_colored_noise_peak_near_pole_angle(self, rng):
        from iwakf.sim import generate_colored_noise

        f = shaping_filter("sf1")
        v = generate_colored_noise(f, 1.0, 200_000, rng)
        curve = welch_psd(v)
        peak = curve.frequencies[np.argmax(curve.scalar())]
        assert peak == pytest.approx(np.deg2rad(100.0), abs=0.05)

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientData):
            welch_psd(np.ones(100))

    def test_parseval_variance(self, rng):
        x = rng.normal(size=100_000) * 2.0
        curve = welch_psd(x)
        # mean density over [0, pi] approximates the variance
        assert np.mean(curve.scalar()) == pytest.approx(4.0, rel=0.05)


def test_autocorr_csv_rows_layout():
    log = InnovationsLog(np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0]))
    est = empirical_autocorrelation(log, 2)
    rows = autocorr_csv_rows(est, bound=0.5)
    assert [r[0] for r in rows] == [1, 2]
    assert len(rows[0]) == 3
    assert rows[0][2] == 0.5
