"""
Feasible inference for realised relative power variations: the asymptotic
variance estimator, clipped pointwise confidence bands, change-of-frequency
smoothness estimation, and the KS / CvM homoskedasticity tests with their
Brownian-bridge limit laws.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import optimize, special, stats

from .errors import DegenerateInputError, DomainError, InputError, RegimeError
from .kernels import LambdaSeriesConfig, abs_moment, lambda_p
from .simulate import SamplePath
from .variation import (
    RelativeVariation,
    decimate,
    differences,
    power_variation,
    relative_from_series,
)

STANDARD_LEVELS = (0.10, 0.05, 0.01)
NU_CLAMP = (0.51, 0.99)


def normal_quantile(q: float) -> float:
    return float(stats.norm.ppf(q))


# --------------------------------------------------------------------------
# asymptotic variance and confidence bands


def _variance_curve(path: SamplePath, lag_multiple: int, p: float, lambda_x: float):
    """V_t(delta) at every grid time k*delta, k = 0..n, plus the relative
    variation (with its leading zero)."""
    pv = power_variation(path, lag_multiple, p, 1)
    pv2 = power_variation(path, lag_multiple, 2 * p, 1)
    total, total2 = pv.values[-1], pv2.values[-1]
    if not (total > 0 and total2 > 0):
        raise DegenerateInputError("terminal p- and 2p-variations must be positive")
    rel = np.concatenate(([0.0], relative_from_series(pv).values))
    cum2 = np.concatenate(([0.0], pv2.values))
    delta = pv.delta
    m2p = abs_moment(2 * p)
    v = lambda_x / (delta * m2p * total**2) * ((1 - rel) ** 2 * cum2 + rel**2 * (total2 - cum2))
    # exact zeros at the ends (rounding in 1 - rel and total2 - cum2)
    v[0] = 0.0
    v[-1] = 0.0
    return pv, rel, v


def _grid_index(t: float, delta: float, n: int) -> int:
    k = int(round(t / delta))
    if not (0 <= k <= n) or not math.isclose(k * delta, t, rel_tol=1e-9, abs_tol=1e-12 * delta):
        raise InputError(f"t={t} is not a grid time of the lag-{delta} grid on [0, {n * delta}]")
    return k


def asy_variance_estimator(path: SamplePath, lag_multiple: int, p: float, t: float, lambda_x: float) -> float:
    """V_t(delta), the plug-in estimate of the conditional asymptotic variance
    of delta^(-1/2) (relative variation - relative integrated |sigma|^p)."""
    if not lambda_x > 0:
        raise DomainError("lambda_x must be positive")
    pv, _, v = _variance_curve(path, lag_multiple, p, lambda_x)
    return float(v[_grid_index(t, pv.delta, pv.values.size)])


def studentized(path: SamplePath, lag_multiple: int, p: float, t: float, target: float, lambda_x: float) -> float:
    """(relative variation at t - target) / sqrt(delta V_t(delta))."""
    pv, rel, v = _variance_curve(path, lag_multiple, p, lambda_x)
    k = _grid_index(t, pv.delta, pv.values.size)
    if v[k] <= 0:
        raise DegenerateInputError("V_t(delta) vanishes at this t")
    return float((rel[k] - target) / math.sqrt(pv.delta * v[k]))


@dataclass(frozen=True)
class ConfidenceBand:
    times: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    delta: float
    p: float

    def covers(self, t: float, value: float) -> bool:
        k = _grid_index(t, self.delta, self.times.size + 1) - 1
        if not 0 <= k < self.times.size:
            raise InputError("t must be an interior grid time")
        return bool(self.lower[k] <= value <= self.upper[k])


def clipped_interval(estimate, half_width):
    est = np.asarray(estimate, dtype=float)
    hw = np.asarray(half_width, dtype=float)
    return np.maximum(est - hw, 0.0), np.minimum(est + hw, 1.0)


def confidence_band(path: SamplePath, lag_multiple: int, p: float, a: float, lambda_x: float) -> ConfidenceBand:
    """Pointwise (1-a) intervals for the relative integrated |sigma|^p at the
    interior grid times, clipped to [0, 1]."""
    if not 0 < a < 1:
        raise DomainError("a must lie in (0, 1)")
    pv, rel, v = _variance_curve(path, lag_multiple, p, lambda_x)
    z = normal_quantile(1 - a / 2)
    est = rel[1:-1]
    hw = z * np.sqrt(pv.delta * v[1:-1])
    lo, hi = clipped_interval(est, hw)
    return ConfidenceBand(pv.times[:-1], est, lo, hi, 1 - a, pv.delta, p)


# --------------------------------------------------------------------------
# smoothness estimation


def cof_estimate_nu(path: SamplePath, lag_multiple: int = 1, variant: str = "decimated") -> float:
    """Change-of-frequency estimate of nu from second-order quadratic
    variations at lags delta and 2 delta.

    ``"decimated"``: both sums over their own non-overlapping grids,
    nu = 1 + log2(RV2(2 delta) / RV2(delta)) / 2. ``"overlapping"``: the
    coarse second differences use every fine-grid start,
    nu = 1/2 + log2(mean ratio) / 2.
    """
    y, _ = decimate(path, lag_multiple)
    if y.size < 5:
        raise InputError("need at least 5 observations for lags delta and 2 delta")
    d1 = differences(y, 2)
    if variant == "decimated":
        d2 = differences(y[::2], 2)
        num, den = float(np.sum(d2 * d2)), float(np.sum(d1 * d1))
        offset = 1.0
    elif variant == "overlapping":
        d2 = y[4:] - 2.0 * y[2:-2] + y[:-4]
        num, den = float(np.mean(d2 * d2)), float(np.mean(d1 * d1))
        offset = 0.5
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if not (num > 0 and den > 0):
        raise DegenerateInputError("second-order variation is zero; nu is not identifiable")
    return offset + 0.5 * math.log2(num / den)


def nu_from_ratio(ratio: float) -> float:
    """Invert the decimated COF relation for a given RV2(2 delta) / RV2(delta)."""
    if not ratio > 0:
        raise DegenerateInputError("ratio must be positive")
    return 1.0 + 0.5 * math.log2(ratio)


def lambda_for_inference(path: SamplePath, lag_multiple: int, p: float, mode: str = "semimartingale",
                         cap: LambdaSeriesConfig = LambdaSeriesConfig()) -> float:
    """lambda_{X,p}: m_2p - m_p^2 for semimartingales, lambda_p(nu_hat) for
    rough BSS data."""
    return _lambda_choice(path, lag_multiple, p, mode, cap)[0]


def _lambda_choice(path, lag_multiple, p, mode, cap=LambdaSeriesConfig()):
    if mode in ("semimartingale", "sm"):
        return float(abs_moment(2 * p) - abs_moment(p) ** 2), "analytic", None
    if mode not in ("bss-plugin", "bss"):
        raise ValueError(f"unknown mode {mode!r}")
    nu_hat = cof_estimate_nu(path, lag_multiple)
    if not 0.5 < nu_hat < 1.0:
        raise RegimeError(
            f"estimated nu = {nu_hat:.4f} is outside (1/2, 1); the BSS central limit theorem "
            "for first-order power variations needs nu in (1/2, 1). Use a larger lag or "
            "--mode sm if the data look like a semimartingale."
        )
    lo, hi = NU_CLAMP
    nu_used = min(max(nu_hat, lo), hi)
    if nu_used != nu_hat:
        warnings.warn(f"nu_hat = {nu_hat:.4f} clamped to {nu_used} before evaluating lambda_p",
                      RuntimeWarning, stacklevel=3)
    return lambda_p(nu_used, p, cap), "nu-hat plug-in", nu_hat


# --------------------------------------------------------------------------
# limit distributions


def ks_limit_cdf(x: float) -> float:
    """P(sup_s |bridge_s| <= x), Kolmogorov's distribution."""
    if x < 0:
        raise DomainError("x must be >= 0")
    if x == 0:
        return 0.0
    if x < 1.0:
        # theta-function form converges fast for small x
        if x < 0.04:
            return 0.0  # exp(-pi^2 / (8 x^2)) underflows to zero here
        total, k = 0.0, 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * x * x))
            total += term
            if term < 1e-16:
                break
            k += 1
        return min(math.sqrt(2 * math.pi) / x * total, 1.0)
    total, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * x * x)
        total += (-1) ** (k - 1) * term
        if term < 1e-12:
            break
        k += 1
    return min(max(1.0 - 2.0 * total, 0.0), 1.0)


def ks_quantile(prob: float) -> float:
    if not 0 < prob < 1:
        raise DomainError("prob must lie in (0, 1)")
    return float(optimize.brentq(lambda x: ks_limit_cdf(x) - prob, 1e-3, 10.0, xtol=1e-14))


def _cvm_series_cdf(x: float) -> float:
    """Anderson-Darling series for P(int_0^1 bridge^2 <= x)."""
    if x <= 0 or 1.0 / (16.0 * x) > 750.0:
        # the leading term exp(-1/(8x)) already underflows here, and kve
        # returns nan for very large arguments
        return 0.0
    total = 0.0
    coef = 1.0  # C(2j, j) / 4^j
    for j in range(200):
        if j:
            coef *= (2 * j - 1) / (2 * j)
        arg = (4 * j + 1) ** 2 / (16.0 * x)
        term = coef * math.sqrt(4 * j + 1) * special.kve(0.25, arg) * math.exp(-2 * arg)
        total += term
        if term < 1e-17:
            break
    return min(max(total / (math.pi * math.sqrt(x)), 0.0), 1.0)


@dataclass(frozen=True)
class QuantileTable:
    """Monte Carlo quantiles of the CvM limit law with build provenance."""

    probs: np.ndarray
    quantiles: np.ndarray
    header: dict = field(default_factory=dict)

    @property
    def resolution(self) -> float:
        """Smallest upper-tail probability the table resolves."""
        return float(1.0 - self.probs[-1])

    def cdf(self, x: float) -> float:
        q, pr = self.quantiles, self.probs
        if x <= 0:
            return 0.0
        if x < q[0]:
            return float(pr[0] * x / q[0])
        return float(np.interp(x, q, pr))

    def quantile(self, prob: float) -> float:
        return float(np.interp(prob, self.probs, self.quantiles))


TABLE_FORMAT = "relvar-cvm-table v1"


def table_probabilities() -> np.ndarray:
    return np.concatenate((np.arange(1, 10000) / 10000.0, [0.99995, 0.99999]))


def build_cvm_table(n_bridges: int = 1_000_000, n_grid: int = 10_000, seed: int = 20140101,
                    chunk: int = 2_000) -> QuantileTable:
    """Simulate ``n_bridges`` Brownian bridges on ``n_grid`` steps and tabulate
    quantiles of the Riemann sum (1/n_grid) sum_i bridge(i/n_grid)^2."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    s = np.arange(1, n_grid + 1) / n_grid
    out = np.empty(n_bridges)
    scale = 1.0 / math.sqrt(n_grid)
    for start in range(0, n_bridges, chunk):
        m = min(chunk, n_bridges - start)
        w = np.cumsum(rng.standard_normal((m, n_grid)), axis=1)
        w *= scale
        w -= s * w[:, -1:]
        np.square(w, out=w)
        out[start:start + m] = w.mean(axis=1)
    probs = table_probabilities()
    qs = np.quantile(out, probs)
    header = dict(format=TABLE_FORMAT, n_bridges=n_bridges, n_grid=n_grid, seed=seed,
                  rng="Philox", statistic="mean of squared discretised Brownian bridge")
    return QuantileTable(probs, qs, header)


def write_cvm_table(table: QuantileTable, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {TABLE_FORMAT}\n")
        for k, v in table.header.items():
            if k != "format":
                fh.write(f"# {k}={v}\n")
        fh.write("prob,quantile\n")
        for pr, q in zip(table.probs, table.quantiles):
            fh.write(f"{float(pr)!r},{float(q)!r}\n")


def read_cvm_table(path: str | Path) -> QuantileTable:
    header, rows = {}, []
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# {TABLE_FORMAT}":
            raise InputError(f"{path}: not a {TABLE_FORMAT} file")
        header["format"] = TABLE_FORMAT
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                header[k] = int(v) if v.isdigit() else v
            elif line and not line.startswith("prob"):
                pr, q = line.split(",")
                rows.append((float(pr), float(q)))
    arr = np.array(rows)
    return QuantileTable(arr[:, 0], arr[:, 1], header)


_table_lock = threading.Lock()
_table_cache: dict = {}


def cvm_table() -> QuantileTable:
    """The shipped quantile table, loaded once (thread-safe)."""
    with _table_lock:
        if "table" not in _table_cache:
            ref = resources.files("relvar") / "data" / "cvm_quantiles.csv"
            with resources.as_file(ref) as p:
                _table_cache["table"] = read_cvm_table(p)
        return _table_cache["table"]


def cvm_limit_cdf(x: float, backend: str = "table") -> float:
    """P(int_0^1 bridge_s^2 ds <= x) from the Monte Carlo table or the series."""
    if backend == "table":
        return cvm_table().cdf(x)
    if backend == "series":
        return _cvm_series_cdf(x)
    raise ValueError(f"unknown backend {backend!r}")


def cvm_quantile(prob: float, backend: str = "table") -> float:
    if not 0 < prob < 1:
        raise DomainError("prob must lie in (0, 1)")
    if backend == "table":
        return cvm_table().quantile(prob)
    return float(optimize.brentq(lambda x: _cvm_series_cdf(x) - prob, 1e-3, 20.0, xtol=1e-14))


# --------------------------------------------------------------------------
# homoskedasticity tests


@dataclass(frozen=True)
class TestResult:
    statistic: float
    variant: str
    p_value: float
    critical_values: dict
    decisions: dict
    lambda_source: str
    lambda_value: float
    p_value_is_bound: bool = False

    __test__ = False  # not a pytest class

    def p_value_str(self) -> str:
        return f"< {self.p_value:.0e}" if self.p_value_is_bound else f"{self.p_value:.4g}"

    def to_dict(self) -> dict:
        return dict(statistic=self.statistic, variant=self.variant, p_value=self.p_value,
                    p_value_is_bound=self.p_value_is_bound,
                    critical_values={str(k): v for k, v in self.critical_values.items()},
                    reject={str(k): v for k, v in self.decisions.items()},
                    lambda_source=self.lambda_source, lambda_value=self.lambda_value)


def _bridge_deviation(rel: RelativeVariation) -> tuple[np.ndarray, int]:
    if rel.order != 1:
        raise InputError("the homoskedasticity tests use first-order variations")
    n = rel.values.size
    if n < 2:
        raise InputError("need floor(T/delta) >= 2")
    k = np.arange(1, n)
    return rel.values[:-1] - k / n, n


def ks_from_relative(rel: RelativeVariation, p: float, lambda_x: float,
                     lambda_source: str = "analytic") -> TestResult:
    dev, _ = _bridge_deviation(rel)
    stat = abs_moment(p) * math.sqrt(rel.T) / math.sqrt(rel.delta * lambda_x) * float(np.max(np.abs(dev)))
    crit = {a: ks_quantile(1 - a) for a in STANDARD_LEVELS}
    pval = 1.0 - ks_limit_cdf(stat)
    return TestResult(stat, "KS", min(max(pval, 0.0), 1.0), crit,
                      {a: stat > c for a, c in crit.items()}, lambda_source, lambda_x)


def cvm_from_relative(rel: RelativeVariation, p: float, lambda_x: float,
                      lambda_source: str = "analytic", backend: str = "table") -> TestResult:
    dev, _ = _bridge_deviation(rel)
    stat = abs_moment(p) ** 2 / lambda_x * float(np.sum(dev * dev))
    crit = {a: cvm_quantile(1 - a, backend) for a in STANDARD_LEVELS}
    pval = 1.0 - cvm_limit_cdf(stat, backend)
    bound = False
    if backend == "table":
        res = cvm_table().resolution
        if pval <= res:
            pval, bound = res, True
    return TestResult(stat, "CvM", min(max(pval, 0.0), 1.0), crit,
                      {a: stat > c for a, c in crit.items()}, lambda_source, lambda_x, bound)


def ks_statistic(path: SamplePath, lag_multiple: int, p: float, lambda_x: float,
                 lambda_source: str = "analytic") -> TestResult:
    """Kolmogorov-Smirnov-type statistic for constant volatility."""
    return ks_from_relative(relative_from_series(power_variation(path, lag_multiple, p, 1)),
                            p, lambda_x, lambda_source)


def cvm_statistic(path: SamplePath, lag_multiple: int, p: float, lambda_x: float,
                  lambda_source: str = "analytic", backend: str = "table") -> TestResult:
    """Cramer-von Mises-type statistic for constant volatility."""
    return cvm_from_relative(relative_from_series(power_variation(path, lag_multiple, p, 1)),
                             p, lambda_x, lambda_source, backend)
