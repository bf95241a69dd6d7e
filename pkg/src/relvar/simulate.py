"""
Sample-path generators with known ground truth.

* ``simulate_gaussian_core``: exact (Cholesky) simulation of the stationary
  Gaussian core G on the output grid.
* ``simulate_bss``: Y = A + X with X = int_{-inf}^t g(t-s) sigma_s dB_s,
  discretised on a refined inner grid with a truncated past.
* ``simulate_semimartingale``: Y = A + int_0^t sigma_s dB_s by Euler steps.

Every draw comes from a counter-based Philox stream keyed by
``(seed, replicate, channel)``, so a replicate is reproducible on its own and
the Brownian driver is shared by models that differ only in drift or
volatility (coupled paths).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import fft as sfft
from scipy import integrate, linalg, signal, special

from .errors import ConfigError, DomainError, FactorizationError
from .kernels import DriftKernelParams, GammaKernelParams, c_delta, core_covariance

# RNG channels
_CH_BROWNIAN = 0
_CH_VOL = 1


@dataclass(frozen=True)
class SamplePath:
    """Observations ``values[i]`` of a process at times ``t0 + i * delta``."""

    values: np.ndarray
    delta: float
    t0: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise DomainError("a sample path needs at least 2 values")
        if not np.all(np.isfinite(v)):
            raise DomainError("sample path values must be finite")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise DomainError("delta must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_increments(self) -> int:
        return self.values.size - 1

    @property
    def horizon(self) -> float:
        return self.n_increments * self.delta

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.delta * np.arange(self.values.size)

    def scaled(self, k: float) -> "SamplePath":
        return SamplePath(self.values * k, self.delta, self.t0, dict(self.meta))

    def shifted(self, c: float) -> "SamplePath":
        return SamplePath(self.values + c, self.delta, self.t0, dict(self.meta))


# --------------------------------------------------------------------------
# volatility models


class VolatilityModel:
    """Base class; subclasses give sigma_s and, where deterministic, its
    integrated powers in closed form."""

    deterministic = True

    def sample(self, times: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def integrated_power(self, p: float, t: float) -> float:
        raise NotImplementedError

    def to_spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(VolatilityModel):
    level: float = 1.0

    def __post_init__(self):
        if not self.level >= 0:
            raise DomainError("volatility levels must be >= 0")

    def sample(self, times, rng=None):
        return np.full(np.shape(times), float(self.level))

    def integrated_power(self, p, t):
        if p == 0:
            return float(t)
        return abs(self.level) ** p * t

    def to_spec(self):
        return f"const:{self.level!r}"


@dataclass(frozen=True)
class PiecewiseConstant(VolatilityModel):
    """sigma_s = levels[i] on [breakpoints[i-1], breakpoints[i]); the first
    level extends to -inf, the last to +inf."""

    breakpoints: tuple = (0.5,)
    levels: tuple = (1.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        if len(self.levels) != len(self.breakpoints) + 1:
            raise DomainError("need exactly one more level than breakpoints")
        if any(x < 0 for x in self.levels):
            raise DomainError("volatility levels must be >= 0")
        if list(self.breakpoints) != sorted(self.breakpoints):
            raise DomainError("breakpoints must be increasing")

    def sample(self, times, rng=None):
        idx = np.searchsorted(self.breakpoints, times, side="right")
        return np.asarray(self.levels)[idx]

    def integrated_power(self, p, t):
        edges = [0.0] + [b for b in self.breakpoints if 0.0 < b < t] + [t]
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            level = float(self.sample(np.array([lo]))[0])
            total += (1.0 if p == 0 else level**p) * (hi - lo)
        return total

    def to_spec(self):
        bps = ":".join(repr(b) for b in self.breakpoints)
        return f"piecewise:{bps}:{','.join(repr(x) for x in self.levels)}"


@dataclass(frozen=True)
class Sinusoidal(VolatilityModel):
    base: float = 1.0
    amplitude: float = 0.5
    period: float = 1.0

    def __post_init__(self):
        if self.base < abs(self.amplitude):
            raise DomainError("sinusoidal volatility needs base >= |amplitude|")
        if not self.period > 0:
            raise DomainError("period must be positive")

    def sample(self, times, rng=None):
        return self.base + self.amplitude * np.sin(2 * np.pi * np.asarray(times) / self.period)

    def integrated_power(self, p, t):
        if p == 0 or self.amplitude == 0:
            return (1.0 if p == 0 else self.base**p) * t
        if p == 2:
            w = 2 * np.pi / self.period
            b, a = self.base, self.amplitude
            return float(
                b * b * t
                + 2 * a * b * (1 - math.cos(w * t)) / w
                + a * a * (t / 2 - math.sin(2 * w * t) / (4 * w))
            )
        f = lambda s: abs(self.base + self.amplitude * math.sin(2 * math.pi * s / self.period)) ** p
        n_periods = max(int(math.ceil(t / self.period)), 1)
        pts = np.linspace(0.0, t, 4 * n_periods + 1)[1:-1]
        val, _ = integrate.quad(f, 0.0, t, points=pts, limit=50 * n_periods + 50, epsabs=0, epsrel=1e-12)
        return float(val)

    def to_spec(self):
        return f"sin:{self.base!r}:{self.amplitude!r}:{self.period!r}"


@dataclass(frozen=True)
class ExpOU(VolatilityModel):
    """sigma = exp(Z), dZ = -reversion (Z - mean) dt + volvol dW, W independent
    of the Brownian driver, Z started from its stationary law."""

    mean: float = 0.0
    reversion: float = 1.0
    volvol: float = 0.5
    deterministic = False

    def __post_init__(self):
        if not (self.reversion > 0 and self.volvol >= 0):
            raise DomainError("ExpOU needs reversion > 0 and volvol >= 0")

    def sample(self, times, rng=None):
        if rng is None:
            raise DomainError("ExpOU volatility needs a random generator")
        times = np.asarray(times, dtype=float)
        dt = np.diff(times)
        if dt.size and not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
            raise DomainError("ExpOU sampling needs a uniform grid")
        stat_sd = self.volvol / math.sqrt(2 * self.reversion)
        eps = rng.standard_normal(times.size)
        if times.size == 1:
            return np.exp(self.mean + stat_sd * eps)
        phi = math.exp(-self.reversion * dt[0])
        innov = stat_sd * math.sqrt(-math.expm1(-2 * self.reversion * dt[0])) * eps
        innov[0] = stat_sd * eps[0]
        z = self.mean + signal.lfilter([1.0], [1.0, -phi], innov)
        return np.exp(z)

    def integrated_power(self, p, t):
        raise DomainError("ExpOU has no closed form; pass the realised path to integrated_power")

    def to_spec(self):
        return f"expou:{self.mean!r}:{self.reversion!r}:{self.volvol!r}"


def parse_vol(spec: str) -> VolatilityModel:
    """Parse ``const:L``, ``piecewise:b1[:b2...]:l0,l1[,...]``,
    ``sin:base:amp:period`` or ``expou:mean:reversion:volvol``."""
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "const":
            return Constant(float(parts[0]) if parts else 1.0)
        if kind == "piecewise":
            levels = tuple(float(x) for x in parts[-1].split(","))
            return PiecewiseConstant(tuple(float(b) for b in parts[:-1]), levels)
        if kind == "sin":
            return Sinusoidal(*(float(x) for x in parts))
        if kind == "expou":
            return ExpOU(*(float(x) for x in parts))
    except (IndexError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad volatility spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown volatility model {kind!r}")


# --------------------------------------------------------------------------
# drift models


@dataclass(frozen=True)
class DriftRate:
    """Bounded deterministic rate a_s = level + amplitude sin(frequency s)."""

    level: float = 2.0
    amplitude: float = 1.0
    frequency: float = 1.0

    def __call__(self, s):
        return self.level + self.amplitude * np.sin(self.frequency * np.asarray(s))


class DriftModel:
    mu = 0.0

    def path(self, times: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class NoDrift(DriftModel):
    def path(self, times):
        return np.zeros(np.shape(times))


@dataclass(frozen=True)
class AbsolutelyContinuous(DriftModel):
    """A_t = mu + int_0^t a_s ds."""

    mu: float = 0.0
    rate: DriftRate = DriftRate()

    def path(self, times):
        t = np.asarray(times, dtype=float)
        r = self.rate
        out = self.mu + r.level * t
        if r.amplitude != 0:
            out = out + r.amplitude * (1 - np.cos(r.frequency * t)) / r.frequency
        return out


@dataclass(frozen=True)
class GammaConvolution(DriftModel):
    """A_t = mu + int_{-inf}^t q(t-s) a_s ds with a gamma kernel q.

    For the sinusoidal rate the convolution is available in closed form:
    int_0^inf q(u) e^{-i f u} du = c' Gamma(eta) (rho + i f)^(-eta).
    """

    mu: float = 0.0
    kernel: DriftKernelParams = DriftKernelParams()
    rate: DriftRate = DriftRate()

    def path(self, times):
        t = np.asarray(times, dtype=float)
        q, r = self.kernel, self.rate
        scale = q.c_prime * math.gamma(q.eta)
        out = self.mu + scale * r.level / q.rho**q.eta + np.zeros_like(t)
        if r.amplitude != 0:
            transfer = (q.rho + 1j * r.frequency) ** (-q.eta)
            out = out + scale * r.amplitude * np.imag(np.exp(1j * r.frequency * t) * transfer)
        return out


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SimConfig:
    """Grid and RNG settings shared by the simulators.

    ``truncation`` is the length of past (time units) kept by the BSS
    discretisation; ``None`` means 20 / lambda. ``scheme`` is ``"hybrid"``
    (exact Wiener integrals on the ``kappa`` cells nearest the kernel
    singularity, Riemann sums at L2-optimal points elsewhere) or
    ``"riemann"`` (plain left-point sums).
    """

    horizon: float = 1.0
    delta_out: float = 1.0 / 4000
    refinement: int = 10
    truncation: float | None = None
    seed: int = 0
    replicate: int = 0
    scheme: str = "hybrid"
    kappa: int = 2
    tail_tolerance: float = 1e-8

    def __post_init__(self):
        if not (self.horizon > 0 and self.delta_out > 0):
            raise ConfigError("horizon and delta_out must be positive")
        if self.refinement < 1:
            raise ConfigError("refinement must be >= 1")
        n = self.horizon / self.delta_out
        if abs(n - round(n)) > 1e-9 * max(n, 1.0) or round(n) < 1:
            raise ConfigError("horizon must be an integer multiple of delta_out")
        if self.scheme not in ("hybrid", "riemann"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.kappa < 1:
            raise ConfigError("kappa must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_n(cls, n: int, horizon: float = 1.0, **kw) -> "SimConfig":
        return cls(horizon=horizon, delta_out=horizon / n, **kw)

    @property
    def n_out(self) -> int:
        return int(round(self.horizon / self.delta_out))

    def truncation_for(self, params: GammaKernelParams) -> float:
        return 20.0 / params.lam if self.truncation is None else float(self.truncation)

    def rng(self, channel: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.replicate, channel))
        return np.random.Generator(np.random.Philox(ss))


def truncated_tail_mass(truncation: float, params: GammaKernelParams) -> float:
    """int_T^inf g^2 / int_0^inf g^2 for the gamma kernel."""
    return float(special.gammaincc(2 * params.nu - 1, 2 * params.lam * truncation))


def _subsample(inner: np.ndarray, refinement: int) -> np.ndarray:
    return inner[::refinement]


# --------------------------------------------------------------------------
# exact Gaussian core

MAX_EXACT_POINTS = 2**14


@lru_cache(maxsize=4)
def _core_cholesky(params: GammaKernelParams, delta: float, n_points: int) -> tuple[np.ndarray, float]:
    lags = delta * np.arange(n_points)
    r = np.asarray(core_covariance(lags, params, method="bessel"), dtype=float)
    cov = linalg.toeplitz(r)
    r0 = r[0]
    tried = []
    for jitter in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            chol = linalg.cholesky(cov + jitter * r0 * np.eye(n_points), lower=True)
            return chol, jitter
        except linalg.LinAlgError:
            tried.append(jitter)
    raise FactorizationError(
        f"core covariance not positive definite (n={n_points}, delta={delta}); "
        f"jitters tried (relative to R(0)): {tried}"
    )


def simulate_gaussian_core(cfg: SimConfig, params: GammaKernelParams) -> SamplePath:
    """Exact stationary Gaussian core sampled at ``0, delta_out, ..., horizon``."""
    n_points = cfg.n_out + 1
    if n_points > MAX_EXACT_POINTS:
        raise ConfigError(f"exact core simulation limited to {MAX_EXACT_POINTS} points")
    chol, jitter = _core_cholesky(params, cfg.delta_out, n_points)
    z = cfg.rng(_CH_BROWNIAN).standard_normal(n_points)
    values = chol @ z
    meta = dict(model="gaussian_core", seed=cfg.seed, replicate=cfg.replicate,
                c=params.c, nu=params.nu, lam=params.lam, jitter=jitter)
    return SamplePath(values, cfg.delta_out, 0.0, meta)


# --------------------------------------------------------------------------
# BSS


@lru_cache(maxsize=32)
def _hybrid_cell_covariance(alpha: float, kappa: int) -> np.ndarray:
    """Covariance of (dB, W_1, ..., W_kappa) over a unit cell [0, 1], where
    W_k = int_0^1 (k - s)^alpha dB_s. Scale by h^(...) per entry."""
    size = kappa + 1
    cov = np.empty((size, size))
    cov[0, 0] = 1.0
    for k in range(1, size):
        cov[0, k] = cov[k, 0] = (k ** (alpha + 1) - (k - 1) ** (alpha + 1)) / (alpha + 1)
    for j in range(1, size):
        for k in range(j, size):
            if j == k == 1:
                val = 1.0 / (2 * alpha + 1)
            elif j == 1:
                # (1 - x)^alpha is singular at x = 1 when alpha < 0
                val, _ = integrate.quad(lambda x: (k - x) ** alpha, 0.0, 1.0,
                                        weight="alg", wvar=(0.0, alpha), epsabs=0, epsrel=1e-13)
            else:
                val, _ = integrate.quad(lambda x: (j - x) ** alpha * (k - x) ** alpha, 0.0, 1.0,
                                        epsabs=0, epsrel=1e-13)
            cov[j, k] = cov[k, j] = val
    return cov


def _riemann_points(alpha: float, k: np.ndarray, scheme: str) -> np.ndarray:
    """Evaluation points (in cell units) for cells [k-1, k] of the kernel."""
    if scheme == "riemann":
        return k.astype(float)
    if alpha == 0.0:
        return k - 0.5
    return ((k ** (alpha + 1) - (k - 1) ** (alpha + 1)) / (alpha + 1)) ** (1.0 / alpha)


@lru_cache(maxsize=8)
def _bss_kernel_spectrum(params: GammaKernelParams, h: float, n_cells: int,
                         scheme: str, kappa: int, fft_len: int) -> np.ndarray:
    k = np.arange(1, n_cells + 1, dtype=float)
    alpha = params.nu - 1.0
    w = np.zeros(n_cells + 1)
    b = _riemann_points(alpha, k, scheme) * h
    w[1:] = params.c * b**alpha * np.exp(-params.lam * b)
    if scheme == "hybrid":
        w[1:kappa + 1] = 0.0
    return sfft.rfft(w, fft_len)


def _bss_core(cfg: SimConfig, params: GammaKernelParams, vol: VolatilityModel) -> tuple[np.ndarray, np.ndarray, dict]:
    """X on the inner grid 0..N_obs (times i*h) and sigma on the cells [0,T]."""
    trunc = cfg.truncation_for(params)
    tail = truncated_tail_mass(trunc, params)
    if tail > cfg.tail_tolerance:
        raise ConfigError(
            f"truncation {trunc} leaves kernel tail mass {tail:.3g} > {cfg.tail_tolerance:.3g}"
        )
    h = cfg.delta_out / cfg.refinement
    n_obs = cfg.n_out * cfg.refinement
    n_past = int(math.ceil(trunc / h))
    n_cells = n_past + n_obs
    alpha = params.nu - 1.0
    # with alpha = 0 the kernel is smooth at 0 and every W_k equals dB, so
    # the exact cells would only add a singular covariance
    kappa = min(cfg.kappa, n_cells) if cfg.scheme == "hybrid" and alpha != 0.0 else 0

    cell_left = (np.arange(n_cells) - n_past) * h
    sigma = vol.sample(cell_left, cfg.rng(_CH_VOL))

    rng = cfg.rng(_CH_BROWNIAN)
    if kappa:
        cov = _hybrid_cell_covariance(alpha, kappa).copy()
        scale = np.ones(kappa + 1)
        scale[0] = math.sqrt(h)
        scale[1:] = h ** (alpha + 0.5)
        cov *= np.outer(scale, scale)
        chol = np.linalg.cholesky(cov)
        noise = rng.standard_normal((n_cells, kappa + 1)) @ chol.T
        dB = noise[:, 0]
    else:
        dB = rng.standard_normal(n_cells) * math.sqrt(h)

    y = sigma * dB
    fft_len = sfft.next_fast_len(2 * n_cells + 1, real=True)
    spec = _bss_kernel_spectrum(params, h, n_cells, cfg.scheme, kappa, fft_len)
    conv = sfft.irfft(sfft.rfft(y, fft_len) * spec, fft_len)
    # cell index of time 0 is n_past; X(time idx c) = sum_k w_k y[c - k]
    idx = np.arange(n_past, n_cells + 1)
    x = conv[idx]
    for k in range(1, kappa + 1):
        src = idx - k
        lg = params.c * math.exp(-params.lam * k * h)
        x = x + lg * sigma[src] * noise[src, k]
    info = dict(inner_step=h, truncation=trunc, truncated_tail_mass=tail, scheme=cfg.scheme,
                kappa=kappa, refinement=cfg.refinement)
    return x, sigma[n_past:], info


def simulate_bss(cfg: SimConfig, params: GammaKernelParams, vol: VolatilityModel = Constant(1.0),
                 drift: DriftModel = NoDrift()) -> SamplePath:
    """Brownian semistationary path Y = A + X on ``0, delta_out, ..., horizon``."""
    x, sigma_cells, info = _bss_core(cfg, params, vol)
    inner_times = np.arange(x.size) * info["inner_step"]
    y = x + drift.path(inner_times)
    meta = dict(model="bss", seed=cfg.seed, replicate=cfg.replicate, c=params.c, nu=params.nu,
                lam=params.lam, vol=vol.to_spec(), drift=type(drift).__name__, **info)
    if not vol.deterministic:
        meta["sigma_cells"] = sigma_cells
    return SamplePath(_subsample(y, cfg.refinement), cfg.delta_out, 0.0, meta)


def simulate_semimartingale(cfg: SimConfig, vol: VolatilityModel = Constant(1.0),
                            drift: DriftModel = NoDrift()) -> SamplePath:
    """Euler path of A_t + int_0^t sigma_s dB_s, sigma frozen at cell left ends."""
    h = cfg.delta_out / cfg.refinement
    n_obs = cfg.n_out * cfg.refinement
    cell_left = np.arange(n_obs) * h
    sigma = vol.sample(cell_left, cfg.rng(_CH_VOL))
    dB = cfg.rng(_CH_BROWNIAN).standard_normal(n_obs) * math.sqrt(h)
    x = np.concatenate(([0.0], np.cumsum(sigma * dB)))
    y = x + drift.path(np.arange(n_obs + 1) * h)
    meta = dict(model="semimartingale", seed=cfg.seed, replicate=cfg.replicate, vol=vol.to_spec(),
                drift=type(drift).__name__, inner_step=h, refinement=cfg.refinement)
    if not vol.deterministic:
        meta["sigma_cells"] = sigma
    return SamplePath(_subsample(y, cfg.refinement), cfg.delta_out, 0.0, meta)


def integrated_power(vol: VolatilityModel, p: float, t: float, path: SamplePath | None = None) -> float:
    """sigma^{p+}_t = int_0^t |sigma_s|^p ds.

    Exact for deterministic models; for ``ExpOU`` the Riemann sum of the
    realised volatility stored in ``path.meta`` is returned.
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    if vol.deterministic:
        return float(vol.integrated_power(p, t))
    if path is None or "sigma_cells" not in path.meta:
        raise DomainError("stochastic volatility needs the simulated path")
    sig = path.meta["sigma_cells"]
    h = path.meta["inner_step"]
    n = min(int(round(t / h)), sig.size)
    return float(np.sum(np.abs(sig[:n]) ** p) * h)


# --------------------------------------------------------------------------
# drift negligibility


class NegligibilityVerdict(NamedTuple):
    holds: bool
    explanation: str

    def __bool__(self):
        return bool(self.holds)


def _exact(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10**9)


def check_drift_negligibility(nu: float, p: float, drift: DriftModel, regime: str) -> NegligibilityVerdict:
    """Decide the sufficient drift-negligibility criteria for the gamma model.

    ``regime`` is ``"consistency"`` (scaled p-variation of A vanishes) or
    ``"clt"`` (the same after an extra delta^(-1/2)). Pass ``nu = 1`` for the
    semimartingale case. Arithmetic is exact on rationals so boundary cases
    are decided consistently.
    """
    if regime not in ("consistency", "clt"):
        raise ValueError("regime must be 'consistency' or 'clt'")
    if not p > 0:
        raise DomainError("p must be positive")
    nu_q, p_q = _exact(nu), _exact(p)
    if isinstance(drift, NoDrift):
        return NegligibilityVerdict(True, "no drift")
    if isinstance(drift, AbsolutelyContinuous):
        if p_q < 1:
            raise DomainError("the absolutely continuous criterion needs p >= 1")
        # c(delta) ~ delta^(nu - 1/2)
        if regime == "consistency":
            expo = Fraction(3, 2) - nu_q
            return NegligibilityVerdict(
                expo > 0, f"delta/c(delta) ~ delta^({expo}) -> 0 iff {expo} > 0")
        expo = p_q * (Fraction(3, 2) - nu_q) - Fraction(1, 2)
        return NegligibilityVerdict(
            expo > 0, f"delta^(p-1/2)/c(delta)^p ~ delta^({expo}) -> 0 iff {expo} > 0")
    if isinstance(drift, GammaConvolution):
        m = min(_exact(drift.kernel.eta), Fraction(1))
        if regime == "consistency":
            rhs = nu_q - Fraction(1, 2)
            label = "nu - 1/2"
        else:
            rhs = nu_q - (p_q - 1) / (2 * p_q)
            label = "nu - (p-1)/(2p)"
        return NegligibilityVerdict(m > rhs, f"min(eta, 1) = {m} > {label} = {rhs} is {m > rhs}")
    raise TypeError(f"unsupported drift model {type(drift).__name__}")
