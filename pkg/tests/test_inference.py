import math

import numpy as np
import pytest

from relvar import inference as inf
from relvar.errors import DegenerateInputError, DomainError, RegimeError
from relvar.kernels import GammaKernelParams
from relvar.simulate import PiecewiseConstant, SamplePath, SimConfig, simulate_bss, simulate_semimartingale
from relvar.variation import RelativeVariation

# Frozen oracles (mpmath root finding on the series, 30 digits)
KS_Q = {0.90: 1.2238478702170824, 0.95: 1.3580986393225504, 0.99: 1.6276236115189502}
CVM_SERIES_Q = {0.90: 0.34730492, 0.95: 0.46136129, 0.99: 0.74345931}

NU56 = GammaKernelParams(1.0, 5 / 6, 1.0)


def rel_from_values(values, T, delta):
    values = np.asarray(values, dtype=float)
    times = delta * np.arange(1, values.size + 1)
    return RelativeVariation(2.0, delta, 1, times, values, T)


def path_with_relative(rel):
    """A path whose squared increments are proportional to diff([0] + rel)."""
    inc = np.sqrt(np.diff(np.concatenate(([0.0], rel))))
    return SamplePath(np.concatenate(([0.0], np.cumsum(inc))), 1.0)


class TestVariance:
    def test_semimartingale_value(self):
        vals = [inf.asy_variance_estimator(simulate_semimartingale(SimConfig.from_n(10_000, seed=1, replicate=r)),
                                           1, 2.0, 0.5, 2.0) for r in range(200)]
        assert np.median(vals) == pytest.approx(0.5, rel=0.10)

    def test_endpoints_zero(self):
        path = simulate_semimartingale(SimConfig.from_n(100, seed=2))
        assert inf.asy_variance_estimator(path, 1, 2.0, 0.0, 2.0) == 0.0
        assert inf.asy_variance_estimator(path, 1, 2.0, 1.0, 2.0) == 0.0

    def test_non_negative(self):
        path = simulate_semimartingale(SimConfig.from_n(200, seed=3), PiecewiseConstant((0.3,), (1, 4)))
        for t in np.linspace(0, 1, 21):
            assert inf.asy_variance_estimator(path, 1, 1.5, float(t), 1.0) >= 0

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            inf.asy_variance_estimator(SamplePath(np.zeros(5), 1.0), 1, 2.0, 1.0, 2.0)


class TestBand:
    def test_normal_quantile(self):
        assert inf.normal_quantile(0.975) == pytest.approx(1.959963984540054, rel=1e-12)

    def test_clipping(self):
        lo, hi = inf.clipped_interval(0.01, 0.05)
        assert lo == 0.0 and hi == pytest.approx(0.06)
        lo, hi = inf.clipped_interval(0.99, 0.05)
        assert hi == 1.0

    def test_band_invariants(self):
        path = simulate_semimartingale(SimConfig.from_n(500, seed=4))
        band = inf.confidence_band(path, 1, 2.0, 0.05, 2.0)
        assert np.all(band.lower <= band.estimate) and np.all(band.estimate <= band.upper)
        assert np.all(band.lower >= 0) and np.all(band.upper <= 1)
        assert band.times.size == 499 and band.level == 0.95

    def test_bad_level(self):
        with pytest.raises(DomainError):
            inf.confidence_band(simulate_semimartingale(SimConfig.from_n(50)), 1, 2.0, 1.5, 2.0)

    def test_relative_clt_variance_piecewise(self):
        # delta^(-1/2) (y~_t - sigma~_t) has limiting variance
        # lambda / (m_p^2 S_T^2) ((1 - s)^2 Q_t + s^2 (Q_T - Q_t)), S = sigma^{2+}, Q = sigma^{4+}
        vol = PiecewiseConstant((0.5,), (1.0, 2.0))
        n, t = 2**14, 0.5
        s, q_t, q_T, S_T = 0.2, 0.5, 8.5, 2.5
        target = 2.0 / S_T**2 * ((1 - s) ** 2 * q_t + s**2 * (q_T - q_t))
        z = []
        for r in range(1000):
            p = simulate_semimartingale(SimConfig.from_n(n, seed=5, replicate=r), vol)
            y = np.cumsum(np.diff(p.values) ** 2)
            z.append((y[n // 2 - 1] / y[-1] - s) * math.sqrt(n))
        assert np.var(z, ddof=1) == pytest.approx(target, rel=0.15)


class TestCof:
    def test_inversion(self):
        assert inf.nu_from_ratio(1.0) == 1.0
        assert inf.nu_from_ratio(2 ** (-1 / 3)) == pytest.approx(5 / 6, abs=1e-15)

    def test_bss_recovery(self):
        p = GammaKernelParams(1.0, 0.8, 1.0)
        est = [inf.cof_estimate_nu(simulate_bss(SimConfig.from_n(2**14, seed=6, replicate=r, refinement=1), p))
               for r in range(60)]
        assert abs(np.median(est) - 0.8) < 0.05

    def test_variants_agree_on_bss(self):
        path = simulate_bss(SimConfig.from_n(2**14, seed=7, refinement=1), NU56)
        a = inf.cof_estimate_nu(path, 1, "decimated")
        b = inf.cof_estimate_nu(path, 1, "overlapping")
        assert abs(a - b) < 0.05

    def test_degenerate(self):
        linear = SamplePath(np.arange(20.0), 1.0)
        with pytest.raises(DegenerateInputError):
            inf.cof_estimate_nu(linear)


class TestLambdaChoice:
    def test_semimartingale(self):
        path = simulate_semimartingale(SimConfig.from_n(100))
        assert inf.lambda_for_inference(path, 1, 2.0, "semimartingale") == pytest.approx(2.0, rel=1e-14)
        assert inf.lambda_for_inference(path, 1, 1.0, "sm") == pytest.approx(1 - 2 / math.pi, rel=1e-12)

    def test_plugin(self):
        path = simulate_bss(SimConfig.from_n(2**14, seed=8, refinement=1), NU56)
        assert inf.lambda_for_inference(path, 1, 2.0, "bss-plugin") > 2.0

    def test_regime_error(self):
        # integrated Brownian motion is far smoother than nu < 1
        rng = np.random.default_rng(0)
        smooth = SamplePath(np.cumsum(np.cumsum(rng.standard_normal(4001))) * 1e-6, 1 / 4000)
        with pytest.raises(RegimeError, match="outside"):
            inf.lambda_for_inference(smooth, 1, 2.0, "bss-plugin")

    def test_clamp_warns(self, monkeypatch):
        monkeypatch.setattr(inf, "cof_estimate_nu", lambda path, m: 0.505)
        path = simulate_semimartingale(SimConfig.from_n(100))
        with pytest.warns(RuntimeWarning, match="clamped"):
            value = inf.lambda_for_inference(path, 1, 2.0, "bss")
        assert value == pytest.approx(inf.lambda_p(0.51, 2.0))


class TestStatistics:
    def test_ks_hand(self):
        rel = rel_from_values([0.4, 0.5, 0.8, 1.0], T=4.0, delta=1.0)
        res = inf.ks_from_relative(rel, 2.0, 2.0)
        assert res.statistic == pytest.approx(2 / math.sqrt(2) * 0.15, rel=1e-12)

    def test_cvm_hand(self):
        rel = rel_from_values([0.4, 0.5, 0.8, 1.0], T=4.0, delta=1.0)
        res = inf.cvm_from_relative(rel, 2.0, 2.0)
        assert res.statistic == pytest.approx(0.0125, rel=1e-12)

    def test_hand_via_path(self):
        path = path_with_relative(np.array([0.4, 0.5, 0.8, 1.0]))
        path = SamplePath(path.values, 1.0)
        assert inf.ks_statistic(path, 1, 2.0, 2.0).statistic == pytest.approx(0.15 * math.sqrt(2), rel=1e-12)
        assert inf.cvm_statistic(path, 1, 2.0, 2.0).statistic == pytest.approx(0.0125, rel=1e-12)

    def test_linear_null(self):
        path = SamplePath(np.arange(101.0), 1.0)
        ks = inf.ks_statistic(path, 1, 2.0, 2.0)
        cvm = inf.cvm_statistic(path, 1, 2.0, 2.0)
        assert ks.statistic == 0.0 and ks.p_value == 1.0
        assert cvm.statistic == 0.0 and cvm.p_value == 1.0

    def test_invariance(self):
        path = simulate_bss(SimConfig.from_n(400, seed=9, refinement=1), NU56)
        base = (inf.ks_statistic(path, 1, 2.0, 2.2).statistic, inf.cvm_statistic(path, 1, 2.0, 2.2).statistic)
        for other in (path.scaled(13.0), path.shifted(5.0)):
            got = (inf.ks_statistic(other, 1, 2.0, 2.2).statistic, inf.cvm_statistic(other, 1, 2.0, 2.2).statistic)
            assert got == pytest.approx(base, rel=1e-10)

    def test_decisions_consistent(self):
        for r in range(30):
            path = simulate_semimartingale(SimConfig.from_n(300, seed=10, replicate=r), PiecewiseConstant((0.5,), (1, 1.5)))
            for res in (inf.ks_statistic(path, 1, 2.0, 2.0), inf.cvm_statistic(path, 1, 2.0, 2.0)):
                assert 0 <= res.p_value <= 1
                for a, crit in res.critical_values.items():
                    assert res.decisions[a] == (res.statistic > crit)
                    if not res.p_value_is_bound and abs(res.p_value - a) > 2e-4:
                        assert res.decisions[a] == (res.p_value < a)

    def test_p_value_bound(self):
        path = simulate_semimartingale(SimConfig.from_n(4000, seed=11), PiecewiseConstant((0.5,), (1, 3)))
        res = inf.cvm_statistic(path, 1, 2.0, 2.0)
        assert res.p_value_is_bound and res.p_value_str().startswith("<")
        assert res.to_dict()["p_value_is_bound"] is True

    def test_too_short(self):
        from relvar.errors import InputError

        with pytest.raises(InputError):
            inf.ks_from_relative(rel_from_values([1.0], 1.0, 1.0), 2.0, 2.0)


class TestLimitLaws:
    def test_ks_endpoints(self):
        assert inf.ks_limit_cdf(0.0) == 0.0
        assert inf.ks_limit_cdf(5.0) == pytest.approx(1.0, abs=1e-12)
        assert 0.9499 <= inf.ks_limit_cdf(1.3581) <= 0.9501

    @pytest.mark.parametrize("prob", [0.90, 0.95, 0.99])
    def test_ks_quantiles(self, prob):
        assert inf.ks_quantile(prob) == pytest.approx(KS_Q[prob], abs=1e-10)

    def test_ks_branches_agree(self):
        # theta form (x < 1) and alternating series meet continuously
        assert inf.ks_limit_cdf(1 - 1e-12) == pytest.approx(inf.ks_limit_cdf(1 + 1e-12), abs=1e-10)

    def test_monotone(self):
        x = np.linspace(0.01, 3, 400)
        ks = [inf.ks_limit_cdf(v) for v in x]
        cvm = [inf.cvm_limit_cdf(v / 2) for v in x]
        ser = [inf.cvm_limit_cdf(v / 2, "series") for v in x]
        for seq in (ks, cvm, ser):
            assert all(a <= b for a, b in zip(seq, seq[1:]))
            assert 0 <= seq[0] and seq[-1] <= 1

    def test_cvm_endpoints(self):
        assert inf.cvm_limit_cdf(1e-4) <= inf.cvm_table().resolution
        assert inf.cvm_limit_cdf(1e-4, "series") < 1e-12
        assert inf.cvm_limit_cdf(10.0) >= 1.0 - inf.cvm_table().resolution
        assert inf.cvm_limit_cdf(10.0, "series") == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("prob", [0.90, 0.95, 0.99])
    def test_cvm_series_quantiles(self, prob):
        assert inf.cvm_quantile(prob, "series") == pytest.approx(CVM_SERIES_Q[prob], abs=1e-7)

    def test_cvm_table_95(self):
        assert inf.cvm_quantile(0.95) == pytest.approx(0.4614, abs=0.003)

    def test_table_matches_series(self):
        x = np.linspace(0.03, 1.5, 60)
        diff = [abs(inf.cvm_limit_cdf(v) - inf.cvm_limit_cdf(v, "series")) for v in x]
        assert max(diff) < 3e-3

    def test_table_header(self):
        h = inf.cvm_table().header
        assert h["n_bridges"] == 1_000_000 and h["n_grid"] == 10_000

    def test_table_round_trip(self, tmp_path):
        t = inf.build_cvm_table(n_bridges=2000, n_grid=100, seed=5, chunk=500)
        t2 = inf.build_cvm_table(n_bridges=2000, n_grid=100, seed=5, chunk=700)
        assert np.array_equal(t.quantiles, t2.quantiles)  # chunking does not change the draws
        inf.write_cvm_table(t, tmp_path / "t.csv")
        back = inf.read_cvm_table(tmp_path / "t.csv")
        assert np.array_equal(back.quantiles, t.quantiles) and np.array_equal(back.probs, t.probs)
        assert back.header["seed"] == 5

    def test_domain(self):
        with pytest.raises(DomainError):
            inf.ks_limit_cdf(-1.0)
        with pytest.raises(DomainError):
            inf.ks_quantile(1.0)
        with pytest.raises(DomainError):
            inf.cvm_quantile(0.0)
