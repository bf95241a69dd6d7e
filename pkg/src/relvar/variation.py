"""
Realised power variations and their self-scaling relative versions.

A path observed at spacing ``delta`` is analysed at lag ``m * delta`` by
keeping observations 0, m, 2m, ... (anchor-0 decimation).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InputError
from .kernels import GammaKernelParams, c_delta
from .simulate import SamplePath


@dataclass(frozen=True)
class VariationSeries:
    """Cumulative variation ``values[i]`` at time ``times[i]``.

    For first-order differences ``times = delta * (1..n)``, for second-order
    differences ``delta * (2..n)``.
    """

    p: float
    delta: float
    order: int
    times: np.ndarray
    values: np.ndarray
    T: float

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class RelativeVariation:
    """Step function t -> [Y]_t / [Y]_T sampled at ``times``; zero before
    ``times[0]`` and exactly one at ``times[-1]``."""

    p: float
    delta: float
    order: int
    times: np.ndarray
    values: np.ndarray
    T: float

    def at(self, t) -> np.ndarray | float:
        """Evaluate the step function at arbitrary times in [0, T]."""
        t_arr = np.asarray(t, dtype=float)
        k = np.floor(t_arr / self.delta + 1e-9).astype(int)
        first = int(round(self.times[0] / self.delta))
        idx = np.clip(k - first, -1, self.values.size - 1)
        out = np.where(idx < 0, 0.0, self.values[np.maximum(idx, 0)])
        return float(out) if out.ndim == 0 else out


def decimate(path: SamplePath, lag_multiple: int) -> tuple[np.ndarray, float]:
    if int(lag_multiple) != lag_multiple or lag_multiple < 1:
        raise InputError("lag_multiple must be a positive integer")
    m = int(lag_multiple)
    return path.values[::m], path.delta * m


def differences(y: np.ndarray, order: int) -> np.ndarray:
    if order == 1:
        return y[1:] - y[:-1]
    if order == 2:
        return y[2:] - 2.0 * y[1:-1] + y[:-2]
    raise InputError("order must be 1 or 2")


def power_variation(path: SamplePath, lag_multiple: int = 1, p: float = 2.0, order: int = 1) -> VariationSeries:
    """Cumulative sum of |increment|^p at lag ``lag_multiple * path.delta``."""
    if not p > 0:
        raise InputError("p must be positive")
    y, delta = decimate(path, lag_multiple)
    if y.size < order + 1:
        raise InputError(
            f"lag {delta} leaves {y.size} observations; order {order} needs at least {order + 1}"
        )
    d = np.abs(differences(y, order))
    vals = np.cumsum(d * d if p == 2 else d**p)
    times = delta * np.arange(order, y.size)
    return VariationSeries(float(p), delta, order, times, vals, delta * (y.size - 1))


def relative_from_series(pv: VariationSeries) -> RelativeVariation:
    total = pv.values[-1]
    if not total > 0:
        raise DegenerateInputError(
            "terminal power variation [Y]_T is zero (constant path); relative variation undefined"
        )
    rel = pv.values / total
    rel[-1] = 1.0
    return RelativeVariation(pv.p, pv.delta, pv.order, pv.times, rel, pv.T)


def relative_power_variation(path: SamplePath, lag_multiple: int = 1, p: float = 2.0,
                             order: int = 1) -> RelativeVariation:
    """Realised relative power variation [Y]_t / [Y]_T on the lag grid."""
    return relative_from_series(power_variation(path, lag_multiple, p, order))


def scaled_variation(path: SamplePath, lag_multiple: int = 1, p: float = 2.0,
                     params: GammaKernelParams | None = None, order: int = 1) -> VariationSeries:
    """(delta / c(delta)^p) [Y]^(p); ``params=None`` means the semimartingale
    normalisation c(delta) = sqrt(delta). Converges to m_p sigma^{p+}_t."""
    pv = power_variation(path, lag_multiple, p, order)
    cd = math.sqrt(pv.delta) if params is None else c_delta(pv.delta, params)
    factor = pv.delta / cd**p
    return VariationSeries(pv.p, pv.delta, pv.order, pv.times, factor * pv.values, pv.T)


def _snap(t: float, delta: float, n: int, what: str) -> int:
    k = int(round(t / delta))
    k = min(max(k, 0), n)
    if not math.isclose(k * delta, t, rel_tol=1e-9, abs_tol=1e-12 * delta):
        warnings.warn(f"{what}={t} is not on the lag grid; snapped to {k * delta}", stacklevel=3)
    return k


def relative_energy_dissipation(path: SamplePath, lag_multiple: int, t: float, u: float,
                                T: float | None = None) -> float:
    """R^+(t, t+u): share of the realised quadratic variation on [0, T]
    that falls in [t, t+u]. ``T`` defaults to the path horizon."""
    y, delta = decimate(path, lag_multiple)
    n_total = y.size - 1
    if T is not None:
        n_total = min(_snap(T, delta, n_total, "T"), n_total)
    if n_total < 1:
        raise InputError("horizon shorter than one lag")
    if not (0 <= t and u > 0):
        raise InputError("need t >= 0 and u > 0")
    k0 = _snap(t, delta, n_total, "t")
    k1 = _snap(t + u, delta, n_total, "t+u")
    if k1 <= k0:
        raise InputError("interval [t, t+u] is empty after snapping to the lag grid")
    sq = np.diff(y[: n_total + 1]) ** 2
    cum = np.concatenate(([0.0], np.cumsum(sq)))
    if not cum[-1] > 0:
        raise DegenerateInputError("terminal quadratic variation is zero (constant path)")
    return float(cum[k1] / cum[-1] - cum[k0] / cum[-1])


def energy_dissipation_estimate(path: SamplePath, lag_multiple: int = 1) -> VariationSeries:
    """[y]_t / delta, the classical estimator of eps^+(t) = int_0^t (dy/ds)^2 ds."""
    pv = power_variation(path, lag_multiple, 2.0, 1)
    return VariationSeries(2.0, pv.delta, 1, pv.times, pv.values / pv.delta, pv.T)


def coarse_grained_dissipation(path: SamplePath, lag_multiple: int = 1) -> float:
    """Average dissipation over [0, T]: ([y]_T / delta) / T."""
    est = energy_dissipation_estimate(path, lag_multiple)
    return est.terminal / est.T


def scaling_exponent(path: SamplePath, lag_multiples, p: float = 2.0) -> float:
    """Least-squares slope of log [Y_delta]_T against log delta.

    Each variation is rescaled to the common horizon ``path.horizon`` (by
    the ratio of horizons), so lags that do not divide the sample size are
    comparable. Expected slopes for a gamma-kernel BSS: -2(1-nu) for
    nu < 1, 0 for nu = 1, 2(nu-1) for 1 < nu < 3/2; 1 for smooth paths.
    """
    lags = sorted({int(m) for m in lag_multiples})
    log_d, log_v = [], []
    for m in lags:
        try:
            pv = power_variation(path, m, p, 1)
        except InputError:
            continue
        if pv.terminal > 0:
            log_d.append(math.log(pv.delta))
            log_v.append(math.log(pv.terminal * path.horizon / pv.T))
    if len(log_d) < 3:
        raise InputError("scaling_exponent needs at least 3 usable lags")
    slope, _ = np.polyfit(np.array(log_d), np.array(log_v), 1)
    return float(slope)
