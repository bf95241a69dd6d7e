"""
Monte Carlo experiments that turn the limit theorems into pass/fail checks.

An experiment is described by an ``ExperimentConfig`` (usually loaded from a
JSON file, see ``CONFIG_SCHEMA``). ``run_experiment`` simulates the
configured number of replicates, each with its own counter-based random
stream, collects per-replicate summaries in replicate order and derives the
aggregates and criteria from them. Results do not depend on ``workers``.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import jsonschema
import numpy as np
from scipy import stats

from . import inference as inf
from .errors import ConfigError, DegenerateInputError, InputError
from .kernels import DriftKernelParams, GammaKernelParams, abs_moment, lambda_p
from .simulate import (
    AbsolutelyContinuous,
    DriftRate,
    GammaConvolution,
    NoDrift,
    SamplePath,
    SimConfig,
    check_drift_negligibility,
    integrated_power,
    parse_vol,
    simulate_bss,
    simulate_semimartingale,
)
from .variation import power_variation, relative_from_series, scaling_exponent

SCHEMA_VERSION = 1
REPORT_VERSION = 1
KINDS = ("consistency", "clt-coverage", "test-size", "test-power", "test-size-power", "scaling", "nu-recovery",
         "drift-negligibility")
_TEST_KINDS = ("test-size", "test-power", "test-size-power")


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DriftSpec:
    kind: str = "none"  # none | absolute | gamma
    mu: float = 0.0
    eta: float = 1.0
    rho: float = 1.0
    c_prime: float = 1.0
    rate_level: float = 2.0
    rate_amplitude: float = 1.0
    rate_frequency: float = 1.0

    def build(self):
        rate = DriftRate(self.rate_level, self.rate_amplitude, self.rate_frequency)
        if self.kind == "none":
            return NoDrift()
        if self.kind == "absolute":
            return AbsolutelyContinuous(self.mu, rate)
        if self.kind == "gamma":
            return GammaConvolution(self.mu, DriftKernelParams(self.c_prime, self.eta, self.rho), rate)
        raise ConfigError(f"unknown drift kind {self.kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    """``process`` is ``bss``, ``semimartingale`` or ``linear`` (the
    deterministic path y_t = t, used as a smooth reference)."""

    process: str = "semimartingale"
    nu: float = 1.0
    c: float = 1.0
    lam: float = 1.0
    vol: str = "const:1"
    drift: DriftSpec = DriftSpec()

    @property
    def kernel(self) -> GammaKernelParams:
        return GammaKernelParams(self.c, self.nu, self.lam)

    @property
    def smoothness(self) -> float:
        return self.nu if self.process == "bss" else 1.0

    def simulate(self, sim: SimConfig, with_drift: bool = True) -> SamplePath:
        drift = self.drift.build() if with_drift else NoDrift()
        if self.process == "bss":
            return simulate_bss(sim, self.kernel, parse_vol(self.vol), drift)
        if self.process == "semimartingale":
            return simulate_semimartingale(sim, parse_vol(self.vol), drift)
        if self.process == "linear":
            return SamplePath(np.arange(sim.n_out + 1) * sim.delta_out, sim.delta_out,
                              meta=dict(model="linear"))
        raise ConfigError(f"unknown process {self.process!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: ModelSpec = ModelSpec()
    name: str = ""
    n: int = 4000
    horizon: float = 1.0
    lag_schedule: tuple = (1,)
    replicates: int = 200
    seed: int = 0
    p: float = 2.0
    level: float = 0.05
    refinement: int = 1
    lambda_mode: str = "analytic"  # analytic | plugin
    eval_times: tuple = (0.5,)
    alternatives: tuple = ()
    tolerances: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        lags = [int(m) for m in self.lag_schedule]
        if not lags or any(m < 1 for m in lags) or any(a <= b for a, b in zip(lags, lags[1:])):
            raise ConfigError("lag_schedule must be strictly decreasing positive lag multiples")
        object.__setattr__(self, "lag_schedule", tuple(lags))
        # keys ending in "_target" are expected values, not tolerances
        for k, v in self.tolerances.items():
            if not k.endswith("_target") and not v > 0:
                raise ConfigError(f"tolerance {k} must be positive")
        if self.kind == "clt-coverage":
            for t in self.eval_times:
                if not 0 < t < 1:
                    raise ConfigError("evaluation times (fractions of T) must lie in (0, 1)")
        if self.kind in ("test-power", "test-size-power") and not self.alternatives:
            raise ConfigError(f"{self.kind} needs at least one alternative model")
        if self.kind == "consistency" and not parse_vol(self.model.vol).deterministic:
            raise ConfigError("consistency needs a deterministic volatility model")

    def sim(self, replicate: int) -> SimConfig:
        return SimConfig(horizon=self.horizon, delta_out=self.horizon / self.n, refinement=self.refinement,
                         seed=self.seed, replicate=replicate)

    def tol(self, key: str, default):
        return self.tolerances.get(key, default)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lag_schedule"] = list(self.lag_schedule)
        d["eval_times"] = list(self.eval_times)
        return d


_DRIFT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["none", "absolute", "gamma"]},
        **{k: {"type": "number"} for k in
           ("mu", "eta", "rho", "c_prime", "rate_level", "rate_amplitude", "rate_frequency")},
    },
}

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "process": {"enum": ["bss", "semimartingale", "linear"]},
        "nu": {"type": "number", "exclusiveMinimum": 0.5},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "lam": {"type": "number", "exclusiveMinimum": 0},
        "vol": {"type": "string"},
        "drift": _DRIFT_SCHEMA,
    },
}

_EXPERIMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "name": {"type": "string"},
        "model": _MODEL_SCHEMA,
        "n": {"type": "integer", "minimum": 2},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "lag_schedule": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "replicates": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "p": {"type": "number", "exclusiveMinimum": 0},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "refinement": {"type": "integer", "minimum": 1},
        "lambda_mode": {"enum": ["analytic", "plugin"]},
        "eval_times": {"type": "array", "items": {"type": "number"}},
        "alternatives": {"type": "array", "items": _MODEL_SCHEMA},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "workers": {"type": "integer", "minimum": 1},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "experiments"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiments": {"type": "array", "items": _EXPERIMENT_SCHEMA, "minItems": 1},
    },
}


def _model_from_dict(d: dict) -> ModelSpec:
    d = dict(d)
    if "drift" in d:
        d["drift"] = DriftSpec(**d["drift"])
    return ModelSpec(**d)


def experiment_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    if "model" in d:
        d["model"] = _model_from_dict(d["model"])
    d["alternatives"] = tuple(_model_from_dict(a) for a in d.get("alternatives", ()))
    for key in ("lag_schedule", "eval_times"):
        if key in d:
            d[key] = tuple(d[key])
    return ExperimentConfig(**d)


def parse_config(text: str, source: str = "<config>") -> list[ExperimentConfig]:
    """Parse and validate a JSON experiment file; errors name line or field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: field {where}: {exc.message}") from exc
    return [experiment_from_dict(e) for e in doc["experiments"]]


def load_config(path) -> list[ExperimentConfig]:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def stream_ids(cfg: ExperimentConfig) -> list[tuple]:
    """(seed, replicate, channel) identifiers of every random stream used."""
    return [(cfg.seed, r, ch) for r in range(cfg.replicates) for ch in (0, 1)]


# --------------------------------------------------------------------------
# per-replicate work


def _relative_target(model: ModelSpec, path: SamplePath, p: float, times: np.ndarray) -> np.ndarray:
    vol = parse_vol(model.vol)
    total = integrated_power(vol, p, path.horizon, path)
    if not total > 0:
        raise DegenerateInputError("integrated volatility is zero")
    return np.array([integrated_power(vol, p, float(t), path) for t in times]) / total


def _sup_deviation(rel_values: np.ndarray, target: np.ndarray) -> float:
    """sup over t of |step(t) - target(t)| for a step function jumping at the
    grid times and a continuous non-decreasing target."""
    before = np.concatenate(([0.0], rel_values[:-1]))
    return float(max(np.max(np.abs(rel_values - target)), np.max(np.abs(before - target))))


def _lambda(cfg: ExperimentConfig, model: ModelSpec, path: SamplePath, lag: int) -> tuple[float, str]:
    p = cfg.p
    if model.process != "bss" or model.nu == 1.0:
        return float(abs_moment(2 * p) - abs_moment(p) ** 2), "analytic"
    if cfg.lambda_mode == "plugin":
        value, source, _ = inf._lambda_choice(path, lag, p, "bss-plugin")
        return value, source
    return lambda_p(model.nu, p), "analytic"


def _rep_consistency(cfg: ExperimentConfig, r: int) -> dict:
    path = cfg.model.simulate(cfg.sim(r))
    out = {}
    for lag in cfg.lag_schedule:
        rel = relative_from_series(power_variation(path, lag, cfg.p, 1))
        target = _relative_target(cfg.model, path, cfg.p, rel.times)
        out[str(lag)] = _sup_deviation(rel.values, target)
    return {"sup_dev": out}


def _rep_clt(cfg: ExperimentConfig, r: int) -> dict:
    path = cfg.model.simulate(cfg.sim(r))
    lag = cfg.lag_schedule[-1]
    lam, _ = _lambda(cfg, cfg.model, path, lag)
    z_crit = inf.normal_quantile(1 - cfg.level / 2)
    delta = path.delta * lag
    n = path.n_increments // lag
    zs, covered = [], []
    for frac in cfg.eval_times:
        k = int(round(frac * n))
        t = k * delta
        target = _relative_target(cfg.model, path, cfg.p, np.array([t]))[0]
        z = inf.studentized(path, lag, cfg.p, t, target, lam)
        band = inf.confidence_band(path, lag, cfg.p, cfg.level, lam)
        zs.append(z)
        covered.append(band.covers(t, target))
        # the clipped interval contains the unclipped one intersected with [0, 1]
        assert covered[-1] == (abs(z) <= z_crit) or not 0 < target < 1
    return {"z": zs, "covered": covered}


def _rep_tests(cfg: ExperimentConfig, r: int) -> dict:
    out = {}
    models = [("H0", cfg.model)] + [(f"H1_{i}", m) for i, m in enumerate(cfg.alternatives)]
    for label, model in models:
        path = model.simulate(cfg.sim(r))
        per_lag = {}
        for lag in cfg.lag_schedule:
            lam, source = _lambda(cfg, model, path, lag)
            ks = inf.ks_statistic(path, lag, cfg.p, lam, source)
            cvm = inf.cvm_statistic(path, lag, cfg.p, lam, source)
            per_lag[str(lag)] = {"ks": ks.statistic, "ks_p": ks.p_value,
                                 "cvm": cvm.statistic, "cvm_p": cvm.p_value}
        out[label] = per_lag
    return out


def _rep_scaling(cfg: ExperimentConfig, r: int) -> dict:
    path = cfg.model.simulate(cfg.sim(r))
    return {"slope": scaling_exponent(path, cfg.lag_schedule, cfg.p)}


def _rep_nu(cfg: ExperimentConfig, r: int) -> dict:
    path = cfg.model.simulate(cfg.sim(r))
    lag = cfg.lag_schedule[-1]
    nu_hat = inf.cof_estimate_nu(path, lag)
    lam = None
    if 0.5 < nu_hat < 1.0:
        lam = inf.lambda_for_inference(path, lag, cfg.p, "bss-plugin")
    return {"nu_hat": nu_hat, "lambda_plugin": lam}


def _rep_drift(cfg: ExperimentConfig, r: int) -> dict:
    sim = cfg.sim(r)
    with_drift = cfg.model.simulate(sim, with_drift=True)
    without = cfg.model.simulate(sim, with_drift=False)
    out = {}
    for lag in cfg.lag_schedule:
        a = relative_from_series(power_variation(with_drift, lag, cfg.p, 1)).values
        b = relative_from_series(power_variation(without, lag, cfg.p, 1)).values
        out[str(lag)] = float(np.max(np.abs(a - b)))
    return {"sup_diff": out}


_REPLICATE_FN = {
    "consistency": _rep_consistency,
    "clt-coverage": _rep_clt,
    "test-size": _rep_tests,
    "test-power": _rep_tests,
    "test-size-power": _rep_tests,
    "scaling": _rep_scaling,
    "nu-recovery": _rep_nu,
    "drift-negligibility": _rep_drift,
}


def _run_one(args) -> dict:
    cfg, r = args
    try:
        summary = _REPLICATE_FN[cfg.kind](cfg, r)
        summary["valid"] = True
    except (DegenerateInputError, InputError) as exc:
        summary = {"valid": False, "error": f"{type(exc).__name__}: {exc}"}
    summary["replicate"] = r
    return summary


def run_replicates(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Per-replicate summaries in replicate order."""
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, r) for r in range(cfg.replicates)]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


# --------------------------------------------------------------------------
# aggregation


def _criterion(name: str, value, passed: bool, tolerance, informational: bool = False) -> dict:
    return {"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed),
            "informational": informational}


def _median_se(x: np.ndarray) -> float:
    # asymptotic s.e. of the median, density estimated by a normal fit
    if x.size < 2:
        return float("nan")
    return float(1.2533 * np.std(x, ddof=1) / math.sqrt(x.size))


def _agg_consistency(cfg, reps):
    medians = {lag: float(np.median([r["sup_dev"][str(lag)] for r in reps])) for lag in cfg.lag_schedule}
    bound = cfg.tol("sup_dev_bound", 0.05)
    seq = [medians[lag] for lag in cfg.lag_schedule]
    crits = [_criterion("median sup deviation at finest lag", seq[-1], seq[-1] < bound,
                        {"sup_dev_bound": bound})]
    if len(seq) > 1:
        crits.append(_criterion("median sup deviation decreases along lag schedule", seq,
                                all(a > b for a, b in zip(seq, seq[1:])), {"monotone": True}))
    return {"median_sup_dev": {str(k): v for k, v in medians.items()}}, crits


def _agg_clt(cfg, reps):
    agg, crits = {}, []
    lo, hi = cfg.tol("coverage_min", 0.925), cfg.tol("coverage_max", 0.975)
    mtol = cfg.tol("mean_abs", 0.1)
    vlo, vhi = cfg.tol("var_min", 0.8), cfg.tol("var_max", 1.2)
    for i, frac in enumerate(cfg.eval_times):
        z = np.array([r["z"][i] for r in reps])
        cov = float(np.mean([r["covered"][i] for r in reps]))
        mean, var = float(np.mean(z)), float(np.var(z, ddof=1))
        agg[str(frac)] = {"coverage": cov, "coverage_se": math.sqrt(cov * (1 - cov) / len(reps)),
                          "z_mean": mean, "z_var": var}
        crits += [
            _criterion(f"coverage at t={frac}T", cov, lo <= cov <= hi, {"coverage_min": lo, "coverage_max": hi}),
            _criterion(f"studentized mean at t={frac}T", mean, abs(mean) < mtol, {"mean_abs": mtol}),
            _criterion(f"studentized variance at t={frac}T", var, vlo <= var <= vhi, {"var_min": vlo, "var_max": vhi}),
        ]
    return agg, crits


def _agg_tests(cfg, reps):
    lag = str(cfg.lag_schedule[-1])
    level = cfg.level
    agg, crits = {}, []
    size_lo, size_hi = cfg.tol("size_min", 0.03), cfg.tol("size_max", 0.08)
    power_min = cfg.tol("power_min", 0.90)
    labels = ["H0"] + [f"H1_{i}" for i in range(len(cfg.alternatives))]
    for label in labels:
        rates = {}
        for stat in ("ks", "cvm"):
            pvals = np.array([r[label][lag][f"{stat}_p"] for r in reps])
            rates[stat] = float(np.mean(pvals < level))
        agg[label] = {"rejection_rate": rates}
        for stat, rate in rates.items():
            if label == "H0" and cfg.kind != "test-power":
                crits.append(_criterion(f"size of {stat.upper()} at level {level}", rate,
                                        size_lo <= rate <= size_hi, {"size_min": size_lo, "size_max": size_hi}))
            elif label != "H0" and cfg.kind != "test-size":
                crits.append(_criterion(f"power of {stat.upper()} against {label}", rate,
                                        rate >= power_min, {"power_min": power_min}))
    null_ks = np.array([r["H0"][lag]["ks"] for r in reps])
    dist = float(stats.kstest(null_ks, np.vectorize(inf.ks_limit_cdf)).statistic)
    dtol = cfg.tol("ks_distance", 0.05)
    agg["H0"]["ks_distance_to_limit"] = dist
    if cfg.kind != "test-power":
        crits.append(_criterion("KS distance of null S_KS to the limit law", dist, dist < dtol,
                                {"ks_distance": dtol}))
    if len(cfg.lag_schedule) >= 3 and cfg.alternatives and cfg.kind != "test-size":
        deltas = np.array([cfg.horizon / cfg.n * m for m in cfg.lag_schedule])
        med = np.array([np.median([r["H1_0"][str(m)]["ks"] for r in reps]) for m in cfg.lag_schedule])
        slope = float(np.polyfit(np.log(deltas), np.log(med), 1)[0])
        target, stol = cfg.tol("divergence_slope_target", -0.5), cfg.tol("divergence_slope_tol", 0.15)
        agg["H1_0"]["median_ks_by_lag"] = {str(m): float(v) for m, v in zip(cfg.lag_schedule, med)}
        agg["H1_0"]["divergence_slope"] = slope
        crits.append(_criterion("log-log slope of median S_KS under H1", slope, abs(slope - target) < stol,
                                {"divergence_slope_target": target, "divergence_slope_tol": stol}))
    return agg, crits


def scaling_target(model: ModelSpec) -> float:
    if model.process == "linear":
        return 1.0
    nu = model.smoothness
    if nu < 1:
        return -2 * (1 - nu)
    return 2 * (nu - 1)


def _agg_scaling(cfg, reps):
    slopes = np.array([r["slope"] for r in reps])
    med = float(np.median(slopes))
    target = scaling_target(cfg.model)
    tol = cfg.tol("slope_tol", 0.05)
    agg = {"median_slope": med, "median_se": _median_se(slopes), "target": target}
    return agg, [_criterion("median scaling slope", med, abs(med - target) < tol,
                            {"slope_tol": tol, "target": target})]


def _agg_nu(cfg, reps):
    nu_hat = np.array([r["nu_hat"] for r in reps])
    err = float(np.median(np.abs(nu_hat - cfg.model.nu)))
    tol = cfg.tol("nu_abs_err", 0.05)
    lams = [r["lambda_plugin"] for r in reps]
    frac_rough = float(np.mean([lam is not None for lam in lams]))
    lam_ok = all(lam > abs_moment(2 * cfg.p) - abs_moment(cfg.p) ** 2 for lam in lams if lam is not None)
    agg = {"median_nu_hat": float(np.median(nu_hat)), "median_abs_error": err,
           "fraction_in_rough_regime": frac_rough}
    crits = [_criterion("median |nu_hat - nu|", err, err < tol, {"nu_abs_err": tol}),
             _criterion("plug-in lambda_p(nu_hat) exceeds the semimartingale value", lam_ok, lam_ok,
                        {"strict": True})]
    return agg, crits


def _agg_drift(cfg, reps):
    model = cfg.model
    verdict = check_drift_negligibility(model.smoothness, cfg.p, model.drift.build(), "clt")
    verdict_c = check_drift_negligibility(model.smoothness, cfg.p, model.drift.build(), "consistency")
    medians = {lag: float(np.median([r["sup_diff"][str(lag)] for r in reps])) for lag in cfg.lag_schedule}
    seq = [medians[lag] for lag in cfg.lag_schedule]
    tol = cfg.tol("sup_diff_bound", 0.02)
    informational = not verdict.holds
    crits = [
        _criterion("median sup |rel_drift - rel_nodrift| at finest lag", seq[-1], seq[-1] < tol,
                   {"sup_diff_bound": tol}, informational),
    ]
    if len(seq) > 1:
        crits.append(_criterion("difference decreases along lag schedule", seq,
                                all(a >= b for a, b in zip(seq, seq[1:])), {"monotone": True}, informational))
    agg = {"predicate_clt": verdict.holds, "predicate_clt_reason": verdict.explanation,
           "predicate_consistency": verdict_c.holds, "median_sup_diff": {str(k): v for k, v in medians.items()}}
    return agg, crits


_AGGREGATE_FN = {
    "consistency": _agg_consistency,
    "clt-coverage": _agg_clt,
    "test-size": _agg_tests,
    "test-power": _agg_tests,
    "test-size-power": _agg_tests,
    "scaling": _agg_scaling,
    "nu-recovery": _agg_nu,
    "drift-negligibility": _agg_drift,
}


@dataclass
class ExperimentReport:
    config: dict
    replicates: list
    aggregates: dict
    criteria: list
    timings: dict
    n_invalid: int = 0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.criteria if not c["informational"])

    def to_dict(self) -> dict:
        return {"report_version": REPORT_VERSION, "config": self.config, "passed": self.passed,
                "n_invalid": self.n_invalid, "aggregates": self.aggregates, "criteria": self.criteria,
                "replicates": self.replicates, "timings": self.timings}

    def to_json(self, **kw) -> str:
        return json.dumps(_jsonable(self.to_dict()), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def aggregate(cfg: ExperimentConfig, replicates: list[dict]) -> tuple[dict, list]:
    valid = [r for r in replicates if r["valid"]]
    if not valid:
        return {}, [_criterion("at least one valid replicate", 0, False, {"min_valid": 1})]
    return _AGGREGATE_FN[cfg.kind](cfg, valid)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    t0 = time.perf_counter()
    reps = run_replicates(cfg, workers)
    t1 = time.perf_counter()
    agg, crits = aggregate(cfg, reps)
    t2 = time.perf_counter()
    return ExperimentReport(
        config=cfg.to_dict(), replicates=reps, aggregates=agg, criteria=crits,
        timings={"simulate_seconds": t1 - t0, "aggregate_seconds": t2 - t1},
        n_invalid=sum(not r["valid"] for r in reps),
    )


def run_consistency(cfg: ExperimentConfig, workers=None) -> ExperimentReport:
    return run_experiment(_check_kind(cfg, "consistency"), workers)


def run_clt_coverage(cfg: ExperimentConfig, workers=None) -> ExperimentReport:
    return run_experiment(_check_kind(cfg, "clt-coverage"), workers)


def run_test_size_power(cfg: ExperimentConfig, workers=None) -> ExperimentReport:
    if cfg.kind not in _TEST_KINDS:
        raise ConfigError(f"expected one of {_TEST_KINDS}, got {cfg.kind}")
    return run_experiment(cfg, workers)


def run_scaling(cfg: ExperimentConfig, workers=None) -> ExperimentReport:
    return run_experiment(_check_kind(cfg, "scaling"), workers)


def run_nu_recovery(cfg: ExperimentConfig, workers=None) -> ExperimentReport:
    return run_experiment(_check_kind(cfg, "nu-recovery"), workers)


def run_drift_negligibility(cfg: ExperimentConfig, workers=None) -> ExperimentReport:
    return run_experiment(_check_kind(cfg, "drift-negligibility"), workers)


def _check_kind(cfg: ExperimentConfig, kind: str) -> ExperimentConfig:
    if cfg.kind != kind:
        raise ConfigError(f"expected a {kind} experiment, got {cfg.kind}")
    return cfg


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **kw)
