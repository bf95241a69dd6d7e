"""
Deterministic building blocks: the gamma kernel, the covariance of its
Gaussian core, the increment scale c(delta), absolute Gaussian moments,
fractional Gaussian noise correlations, Hermite coefficients of |x|^p and
the asymptotic variance constant lambda_p(nu) of rough power variations.

All functions are pure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import DomainError, TruncationError

# sup over nu in (1/2, 1) and j >= 2 of |rho_nu(j)| * j^(3 - 2 nu) is ~0.1364
# (attained near nu = 0.745, j = 2).
FGN_TAIL_CONSTANT = 0.14


@dataclass(frozen=True)
class GammaKernelParams:
    """Parameters of g(t) = c t^(nu-1) exp(-lam t).

    ``lam`` is the decay rate (``lambda`` is a Python keyword).
    """

    c: float = 1.0
    nu: float = 5.0 / 6.0
    lam: float = 1.0

    def __post_init__(self):
        for name in ("c", "nu", "lam"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.c <= 0:
            raise DomainError("c must be positive")
        if self.lam <= 0:
            raise DomainError("lam must be positive")
        if self.nu <= 0.5:
            raise DomainError("nu must exceed 1/2")

    @property
    def regime(self) -> str:
        if self.nu == 1.0:
            return "semimartingale"
        if self.nu < 1.0:
            return "rough"
        if self.nu <= 1.5:
            return "smooth"
        return "differentiable"

    @property
    def is_semimartingale(self) -> bool:
        return self.nu == 1.0


@dataclass(frozen=True)
class DriftKernelParams:
    """Parameters of the drift kernel q(t) = c' t^(eta-1) exp(-rho t)."""

    c_prime: float = 1.0
    eta: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        for name in ("c_prime", "eta", "rho"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite")


@dataclass(frozen=True)
class LambdaSeriesConfig:
    """Truncation of the Hermite / correlation double series for lambda_p."""

    hermite_order_cap: int = 20
    correlation_tail_cap: int = 100_000
    tail_tolerance: float = 1e-6

    def __post_init__(self):
        if self.hermite_order_cap < 2:
            raise DomainError("hermite_order_cap must be >= 2")
        if self.correlation_tail_cap < 1:
            raise DomainError("correlation_tail_cap must be >= 1")
        if not self.tail_tolerance > 0:
            raise DomainError("tail_tolerance must be positive")


def gamma_kernel_eval(t, params: GammaKernelParams):
    """Evaluate g(t) = c t^(nu-1) e^(-lam t) for t > 0 (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise DomainError("the gamma kernel is defined on (0, inf)")
    out = params.c * t_arr ** (params.nu - 1.0) * np.exp(-params.lam * t_arr)
    return float(out) if out.ndim == 0 else out


def _core_cov_zero(params: GammaKernelParams) -> float:
    two_a = 2.0 * params.nu - 1.0
    return params.c**2 * math.gamma(two_a) / (2.0 * params.lam) ** two_a


def _core_cov_quad(t: float, params: GammaKernelParams) -> float:
    nu, lam = params.nu, params.lam
    alpha = nu - 1.0
    if t == 0.0:
        return _core_cov_zero(params)
    kw = dict(epsabs=0.0, epsrel=1e-13, limit=400)
    # [0, t]: the u^alpha singularity goes into the algebraic weight
    head, _ = integrate.quad(
        lambda u: (u + t) ** alpha * math.exp(-2.0 * lam * u),
        0.0, t, weight="alg", wvar=(alpha, 0.0), **kw,
    )
    tail, _ = integrate.quad(
        lambda u: u**alpha * (u + t) ** alpha * math.exp(-2.0 * lam * u),
        t, np.inf, **kw,
    )
    return params.c**2 * math.exp(-lam * t) * (head + tail)


def _core_cov_bessel(t: np.ndarray, params: GammaKernelParams) -> np.ndarray:
    nu, lam = params.nu, params.lam
    out = np.empty_like(t)
    zero = t == 0.0
    out[zero] = _core_cov_zero(params)
    tz = t[~zero]
    z = lam * tz
    # kve(v, z) = kv(v, z) e^z
    out[~zero] = (
        params.c**2 * math.gamma(nu) / math.sqrt(math.pi)
        * (tz / (2.0 * lam)) ** (nu - 0.5)
        * special.kve(nu - 0.5, z) * np.exp(-z)
    )
    return out


def core_covariance(t, params: GammaKernelParams, method: str = "quad"):
    """Stationary covariance R(t) = int_0^inf g(u) g(u+t) du of the core.

    ``method="quad"`` integrates numerically (the default, valid for every
    nu); ``method="bessel"`` uses the modified-Bessel closed form and is the
    vectorised fast path used by the simulators. nu = 1 always takes the
    Ornstein-Uhlenbeck closed form.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0):
        raise DomainError("core_covariance needs finite t >= 0")
    if params.is_semimartingale:
        out = params.c**2 * np.exp(-params.lam * t_arr) / (2.0 * params.lam)
    elif method == "bessel":
        out = _core_cov_bessel(np.atleast_1d(t_arr), params).reshape(t_arr.shape)
    elif method == "quad":
        out = np.vectorize(lambda s: _core_cov_quad(float(s), params))(t_arr)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if np.ndim(out) == 0 else out


def c_delta(delta, params: GammaKernelParams, method: str = "quad"):
    """Standard deviation of a lag-delta increment of the Gaussian core."""
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("delta must be positive")
    if params.is_semimartingale:
        var = params.c**2 * -np.expm1(-params.lam * d) / params.lam
    else:
        var = 2.0 * (_core_cov_zero(params) - np.asarray(core_covariance(d, params, method)))
    out = np.sqrt(var)
    return float(out) if out.ndim == 0 else out


def abs_moment(p):
    """m_p = E|xi|^p for a standard normal xi."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(~(p_arr > 0)):
        raise DomainError("p must be positive")
    out = 2.0 ** (p_arr / 2.0) * special.gamma((p_arr + 1.0) / 2.0) / math.sqrt(math.pi)
    return float(out) if out.ndim == 0 else out


_SERIES_TERMS = 20


def fgn_correlation(j, nu: float):
    """Correlation at lag j >= 1 of fractional Gaussian noise with H = nu - 1/2.

    Lags j >= 4 use the even Taylor series of (1+x)^a - 2 + (1-x)^a at
    x = 1/j, which avoids the cancellation in the three-term formula.
    """
    if not 0.5 < nu < 1.0:
        raise DomainError("fgn_correlation requires nu in (1/2, 1)")
    j_arr = np.asarray(j)
    if np.any(j_arr < 1) or np.any(j_arr != np.floor(j_arr)):
        raise DomainError("lags must be integers >= 1")
    jf = j_arr.astype(float)
    a = 2.0 * nu - 1.0
    out = np.empty_like(jf)

    small = jf < 4
    js = jf[small]
    # j = 1 relies on 0 ** a == 0 (a > 0)
    out[small] = 0.5 * ((js + 1.0) ** a - 2.0 * js**a + (js - 1.0) ** a)

    jl = jf[~small]
    if jl.size:
        x2 = (1.0 / jl) ** 2
        total = np.zeros_like(jl)
        power = np.ones_like(jl)
        for k in range(1, _SERIES_TERMS + 1):
            power = power * x2
            total += special.binom(a, 2 * k) * power
        out[~small] = jl**a * total
    return float(out) if out.ndim == 0 else out


def hermite_coefficients(p: float, cap: LambdaSeriesConfig = LambdaSeriesConfig()):
    """Coefficients a_l of |x|^p - m_p in probabilists' Hermite polynomials.

    Returns ``[(l, a_l) for l in 2..L]``. Odd coefficients vanish by
    symmetry. Even ones are E[|xi|^p He_l(xi)] / l!, computed with a
    generalised Gauss-Laguerre rule after substituting y = x^2 / 2, which is
    exact because He_l(sqrt(2y)) is a polynomial in y for even l.
    """
    if not p > 0:
        raise DomainError("p must be positive")
    return list(_hermite_coefficients(float(p), cap.hermite_order_cap))


@lru_cache(maxsize=64)
def _hermite_coefficients(p: float, order_cap: int) -> tuple:
    n_nodes = order_cap + 2
    y, w = special.roots_genlaguerre(n_nodes, (p - 1.0) / 2.0)
    x = np.sqrt(2.0 * y)
    prefac = 2.0 ** ((p - 1.0) / 2.0) * 2.0 / math.sqrt(2.0 * math.pi)
    # He_{l+1} = x He_l - l He_{l-1}
    he_prev, he = np.ones_like(x), x.copy()
    out = []
    for l in range(2, order_cap + 1):
        he_prev, he = he, x * he - (l - 1) * he_prev
        if l % 2:
            out.append((l, 0.0))
        else:
            out.append((l, prefac * float(w @ he) / math.factorial(l)))
    return tuple(out)


class LambdaSeries(NamedTuple):
    value: float
    error_bound: float
    hermite_tail: float


def lambda_p_series(nu: float, p: float, cap: LambdaSeriesConfig = LambdaSeriesConfig()) -> LambdaSeries:
    """lambda_p(nu) with an a-priori bound on the truncation error.

    Terms with Hermite order l <= L are summed over lags j <= J, plus a
    Hurwitz-zeta tail built from rho_nu(j) ~ (nu-1)(2nu-1) j^(2nu-3). The
    Hermite remainder (known exactly via Parseval) multiplies a correlation
    factor within 2 sum_j |rho_j|^(L+2) of one, which gives the bound.
    """
    if not 0.5 < nu < 1.0:
        raise DomainError("lambda_p is defined for nu in (1/2, 1)")
    if not p > 0:
        raise DomainError("p must be positive")
    if nu < 0.51:
        warnings.warn(
            f"lambda_p near nu = 1/2 (nu={nu}) is poorly conditioned; "
            "treat the result as approximate",
            RuntimeWarning,
            stacklevel=2,
        )
    L, J = cap.hermite_order_cap, cap.correlation_tail_cap
    rho = fgn_correlation(np.arange(1, J + 1), nu)
    k_asym = (nu - 1.0) * (2.0 * nu - 1.0)
    decay = 3.0 - 2.0 * nu

    def corr_sum(l: int, absolute: bool = False) -> tuple[float, float]:
        r = np.abs(rho) if absolute else rho
        s = float(np.sum(r**l))
        tail = abs(k_asym) ** l * float(special.zeta(l * decay, J + 1))
        if not absolute and l % 2:
            tail = -tail
        return s + tail, abs(tail)

    head = 0.0
    bound = 0.0
    captured = 0.0
    for l, a_l in _hermite_coefficients(float(p), L):
        if a_l == 0.0:
            continue
        weight = math.factorial(l) * a_l**2
        captured += weight
        s, tail = corr_sum(l)
        head += weight * (1.0 + 2.0 * s)
        bound += weight * 2.0 * tail
    variance = float(abs_moment(2 * p) - abs_moment(p) ** 2)
    hermite_tail = max(variance - captured, 0.0)
    s_abs, _ = corr_sum(L + 2, absolute=True)
    bound += hermite_tail * 2.0 * s_abs
    if bound > cap.tail_tolerance:
        raise TruncationError(
            f"lambda_p truncation bound {bound:.3g} exceeds tolerance "
            f"{cap.tail_tolerance:.3g}; raise hermite_order_cap or correlation_tail_cap"
        )
    return LambdaSeries(head + hermite_tail, bound, hermite_tail)


def lambda_p(nu: float, p: float, cap: LambdaSeriesConfig = LambdaSeriesConfig()) -> float:
    """Asymptotic variance constant of the rough-BSS power variation CLT."""
    return _lambda_p_cached(float(nu), float(p), cap)


@lru_cache(maxsize=512)
def _lambda_p_cached(nu: float, p: float, cap: LambdaSeriesConfig) -> float:
    return lambda_p_series(nu, p, cap).value
