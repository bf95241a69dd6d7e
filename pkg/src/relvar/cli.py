"""
Command-line front end.

    relvar simulate     write a simulated path as a single-column CSV
    relvar analyze      per-subperiod nu estimate, confidence band and tests
    relvar dissipation  accumulated relative quadratic variation at several lags
    relvar mc           run Monte Carlo experiments from a JSON config
    relvar tables       KS / CvM critical values

Exit status: 0 success, 2 usage error, 3 data error, 4 failed experiment.
Outputs go to ``--out-dir``, else ``$RELVAR_OUT_DIR``, else the current
directory. Price series should be deseasonalised before analysis; only a
log transform is offered here.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import harness
from . import inference as inf
from .errors import ConfigError, DegenerateInputError, DomainError, InputError, RegimeError
from .kernels import GammaKernelParams
from .simulate import (
    AbsolutelyContinuous,
    DriftRate,
    NoDrift,
    SamplePath,
    SimConfig,
    parse_vol,
    simulate_bss,
    simulate_semimartingale,
)
from .variation import power_variation, relative_from_series

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FAILED = 0, 2, 3, 4
OUT_DIR_ENV = "RELVAR_OUT_DIR"
PATH_FORMAT = "relvar-path v1"
ANALYSIS_VERSION = 1


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# --------------------------------------------------------------------------
# ingestion


@dataclass(frozen=True)
class IngestSpec:
    source: Path
    delta: float | None = None
    subsample: int = 1
    subperiod: float | None = None
    log: bool = False

    def __post_init__(self):
        if self.delta is not None and not self.delta > 0:
            raise UsageError("--delta must be positive")
        if self.subsample < 1:
            raise UsageError("--subsample must be >= 1")
        if self.subperiod is not None and not self.subperiod > 0:
            raise UsageError("--subperiod must be positive")


def _header_fields(lines) -> dict:
    out = {}
    for line in lines:
        body = line[1:].strip()
        key, sep, val = body.partition("=")
        if sep and " " not in key:
            out[key.strip()] = val.strip()
    return out


def read_series(spec: IngestSpec) -> tuple[np.ndarray, float, dict]:
    """Values, sampling interval and '#' header fields of an input file.

    Accepts one float per line or ``time,value`` rows; '#' lines are
    comments (``# key=value`` comments are kept as metadata). For
    two-column input without ``--delta`` the interval is taken from the
    time column, which must be uniformly spaced.
    """
    try:
        raw = spec.source.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {spec.source}: {exc.strerror}") from exc
    comments = [ln for ln in raw if ln.lstrip().startswith("#")]
    rows = [ln.strip() for ln in raw if ln.strip() and not ln.lstrip().startswith("#")]
    if rows and any(ch.isalpha() for ch in rows[0].replace("e", "").replace("E", "")):
        rows = rows[1:]  # column header such as "time,value"
    if not rows:
        raise UsageError(f"{spec.source}: no data rows")
    meta = _header_fields(comments)
    try:
        cols = [r.split(",") for r in rows]
        width = len(cols[0])
        if width not in (1, 2) or any(len(c) != width for c in cols):
            raise DataError(f"{spec.source}: expected 1 or 2 comma-separated columns on every row")
        vals = np.array([float(c[-1]) for c in cols])
        times = np.array([float(c[0]) for c in cols]) if width == 2 else None
    except ValueError as exc:
        raise DataError(f"{spec.source}: unparsable number ({exc})") from exc
    if not np.all(np.isfinite(vals)):
        raise DataError(f"{spec.source}: non-finite values")
    delta = spec.delta
    if delta is None and "delta" in meta:
        delta = float(meta["delta"])
    if delta is None and times is not None and times.size > 1:
        steps = np.diff(times)
        delta = float(np.mean(steps))
        if not (delta > 0 and np.allclose(steps, delta, rtol=1e-6, atol=0)):
            raise DataError(f"{spec.source}: time column is not uniformly spaced")
    if delta is None:
        raise UsageError("--delta is required for single-column input")
    if spec.log:
        if np.any(vals <= 0):
            raise DataError("log transform needs strictly positive values")
        vals = np.log(vals)
    return vals, float(delta), meta


def zero_increment_fraction(values: np.ndarray, lag: int) -> float:
    inc = np.diff(values[::lag])
    return float(np.mean(inc == 0.0)) if inc.size else float("nan")


def split_subperiods(values: np.ndarray, delta: float, length: float | None) -> list[tuple[int, np.ndarray]]:
    """Consecutive windows of ``length`` time units sharing endpoints; a
    trailing partial window is kept and judged by the length check later."""
    if length is None:
        return [(0, values)]
    k = int(round(length / delta))
    if k < 1:
        raise UsageError("--subperiod is shorter than one sampling interval")
    out = []
    for start in range(0, values.size - 1, k):
        out.append((start, values[start:start + k + 1]))
    return out


# --------------------------------------------------------------------------
# output helpers


def out_dir(arg: str | None) -> Path:
    d = Path(arg or os.environ.get(OUT_DIR_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _num(x) -> str:
    return repr(float(x))


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(harness._jsonable(obj), indent=2, allow_nan=True) + "\n")


def _provenance(fields: dict) -> str:
    return " ".join(f"{k}={v}" for k, v in fields.items()).replace("--", "- -")


def save_svg(fig, path: Path, provenance: dict) -> None:
    fig.savefig(path, format="svg")
    text = path.read_text()
    comment = f"<!-- relvar {__version__} provenance: {_provenance(provenance)} -->\n"
    head, sep, rest = text.partition("?>\n")
    path.write_text(head + sep + comment + rest if sep else comment + text)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "relvar"  # deterministic element ids
    return plt


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    if args.nu is not None and not args.nu > 0.5:
        raise UsageError("nu must exceed 1/2")
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    delta = args.delta if args.delta is not None else 1.0 / (args.n - 1)
    if not delta > 0:
        raise UsageError("--delta must be positive")
    n_inc = args.n - 1
    try:
        vol = parse_vol(args.sigma)
        cfg = SimConfig(horizon=n_inc * delta, delta_out=delta, refinement=args.refinement,
                        seed=args.seed, replicate=args.replicate)
        drift = NoDrift() if args.drift == 0 else AbsolutelyContinuous(0.0, DriftRate(args.drift, 0.0, 1.0))
        if args.model == "bss":
            params = GammaKernelParams(args.c, args.nu if args.nu is not None else 5 / 6, args.lam)
            path = simulate_bss(cfg, params, vol, drift)
        else:
            path = simulate_semimartingale(cfg, vol, drift)
    except (DomainError, ConfigError) as exc:
        raise UsageError(str(exc)) from exc
    header = dict(format=PATH_FORMAT, model=args.model, sigma=vol.to_spec(), seed=args.seed,
                  replicate=args.replicate, delta=_num(delta), n=args.n, refinement=args.refinement,
                  drift_rate=args.drift)
    if args.model == "bss":
        header.update(nu=repr(params.nu), c=repr(params.c), lam=repr(params.lam))
    target = Path(args.out) if args.out else out_dir(args.out_dir) / f"path_{args.model}_seed{args.seed}.csv"
    write_path_csv(target, path, header)
    print(target)
    return EXIT_OK


def write_path_csv(target: Path, path: SamplePath, header: dict) -> None:
    lines = [f"# {k}={v}" for k, v in header.items()]
    lines += [_num(v) for v in path.values]
    target.write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# analyze


def analyze_subperiod(path: SamplePath, lag: int, p: float, level: float, mode: str) -> dict:
    """Full pipeline on one window; raises on degenerate or out-of-regime data."""
    nu_hat = inf.cof_estimate_nu(path, lag)
    lam, source, _ = inf._lambda_choice(path, lag, p, "sm" if mode == "sm" else "bss-plugin")
    rel = relative_from_series(power_variation(path, lag, p, 1))
    band = inf.confidence_band(path, lag, p, level, lam)
    ks = inf.ks_from_relative(rel, p, lam, source)
    cvm = inf.cvm_from_relative(rel, p, lam, source)
    return dict(
        nu_hat=nu_hat, lambda_value=lam, lambda_source=source, delta=rel.delta,
        n_increments=int(rel.values.size),
        zero_increment_fraction=zero_increment_fraction(np.asarray(path.values), lag),
        relative_variation=dict(times=rel.times, values=rel.values),
        band=dict(times=band.times, lower=band.lower, upper=band.upper, level=band.level),
        ks=ks.to_dict(), cvm=cvm.to_dict(),
        reject={"ks": ks.p_value < level, "cvm": cvm.p_value < level},
    )


def run_analysis(values: np.ndarray, delta: float, *, subsample: int = 1, subperiod: float | None = None,
                 p: float = 2.0, level: float = 0.05, mode: str = "sm", min_increments: int = 100) -> dict:
    subs = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for i, (start, window) in enumerate(split_subperiods(values, delta, subperiod)):
            entry = dict(index=i, start_time=start * delta, n_observations=int(window.size))
            n_sub = (window.size - 1) // subsample
            if n_sub < min_increments:
                entry.update(status="skipped", reason=f"{n_sub} increments after subsampling < {min_increments}")
            else:
                try:
                    entry.update(status="ok", **analyze_subperiod(SamplePath(window, delta), subsample, p, level, mode))
                except (DegenerateInputError, RegimeError) as exc:
                    entry.update(status="skipped", reason=str(exc))
            subs.append(entry)
    ok = [s for s in subs if s["status"] == "ok"]
    summary = dict(
        n_subperiods=len(subs), n_analysed=len(ok),
        rejection_fraction={k: (float(np.mean([s["reject"][k] for s in ok])) if ok else None)
                            for k in ("ks", "cvm")},
        zero_increment_fraction=zero_increment_fraction(values, subsample),
        warnings=sorted({str(w.message) for w in caught}),
    )
    return dict(summary=summary, subperiods=subs)


def _plot_analysis(report: dict, target: Path, provenance: dict) -> None:
    plt = _pyplot()
    ok = [s for s in report["subperiods"] if s["status"] == "ok"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for s in ok:
        # window times are measured from the window start
        rv = s["relative_variation"]
        span = rv["times"][-1]
        ax1.plot(np.asarray(rv["times"]) / span, rv["values"], lw=0.8)
        if len(ok) == 1:
            ax1.fill_between(np.asarray(s["band"]["times"]) / span, s["band"]["lower"], s["band"]["upper"],
                             alpha=0.3, lw=0)
    ax1.plot([0, 1], [0, 1], "k--", lw=0.8)
    ax1.set_xlabel("t / T")
    ax1.set_ylabel("relative power variation")
    idx = [s["index"] for s in ok]
    ax2.plot(idx, [s["ks"]["p_value"] for s in ok], "o", ms=3, label="KS")
    ax2.plot(idx, [s["cvm"]["p_value"] for s in ok], "s", ms=3, label="CvM")
    ax2.axhline(provenance["level"], color="k", lw=0.8)
    ax2.set_xlabel("subperiod")
    ax2.set_ylabel("p-value")
    ax2.set_ylim(0, 1)
    ax2.legend()
    fig.tight_layout()
    save_svg(fig, target, provenance)
    plt.close(fig)


def cmd_analyze(args) -> int:
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    if not args.power > 0:
        raise UsageError("--power must be positive")
    spec = IngestSpec(Path(args.input), args.delta, args.subsample, args.subperiod, args.log)
    values, delta, meta = read_series(spec)
    if values.size < 2:
        raise DataError("need at least two observations")
    report = run_analysis(values, delta, subsample=spec.subsample, subperiod=spec.subperiod, p=args.power,
                          level=args.level, mode=args.mode, min_increments=args.min_increments)
    if not any(s["status"] == "ok" for s in report["subperiods"]):
        reasons = {s.get("reason") for s in report["subperiods"]}
        raise DataError("no subperiod could be analysed: " + "; ".join(sorted(r for r in reasons if r)))
    provenance = dict(source=str(spec.source), delta=_num(delta), subsample=spec.subsample,
                      subperiod=spec.subperiod, power=args.power, level=args.level, mode=args.mode,
                      log=spec.log)
    doc = dict(analysis_version=ANALYSIS_VERSION, relvar_version=__version__, input=provenance,
               input_header=meta, **report)
    d = out_dir(args.out_dir)
    stem = args.name or spec.source.stem
    write_json(d / f"{stem}_analysis.json", doc)
    if not args.no_plot:
        _plot_analysis(report, d / f"{stem}_analysis.svg", provenance)
    s = report["summary"]
    print(f"{s['n_analysed']}/{s['n_subperiods']} subperiods analysed; rejection fraction at "
          f"{args.level}: KS {s['rejection_fraction']['ks']}, CvM {s['rejection_fraction']['cvm']}; "
          f"zero increments {s['zero_increment_fraction']:.4f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# dissipation


def dissipation_curves(values: np.ndarray, delta: float, lags) -> dict:
    path = SamplePath(values, delta)
    out = {}
    for m in lags:
        rel = relative_from_series(power_variation(path, m, 2.0, 1))
        out[m] = rel
    return out


def cmd_dissipation(args) -> int:
    spec = IngestSpec(Path(args.input), args.delta, 1, None, args.log)
    values, delta, _ = read_series(spec)
    try:
        lags = sorted({int(x) for x in args.lags.split(",")})
    except ValueError as exc:
        raise UsageError("--lags must be comma-separated integers") from exc
    if not lags or lags[0] < 1:
        raise UsageError("--lags must be positive")
    if values.size - 1 < lags[-1]:
        raise DataError(f"series too short for lag {lags[-1]}")
    try:
        curves = dissipation_curves(values, delta, lags)
    except DegenerateInputError as exc:
        raise DataError(str(exc)) from exc
    d = out_dir(args.out_dir)
    stem = args.name or spec.source.stem
    rows = [f"# delta={_num(delta)}", f"# source={spec.source}", "lag,time,relative_qv"]
    for m, rel in curves.items():
        rows += [f"{m},{_num(t)},{_num(v)}" for t, v in zip(rel.times, rel.values)]
    (d / f"{stem}_dissipation.csv").write_text("\n".join(rows) + "\n")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for m, rel in curves.items():
        ax.step(np.concatenate(([0.0], rel.times)), np.concatenate(([0.0], rel.values)), where="post",
                lw=0.9, label=f"lag {m} (delta={rel.delta:.3g})")
    ax.set_xlabel("t")
    ax.set_ylabel("accumulated relative quadratic variation")
    ax.legend()
    fig.tight_layout()
    save_svg(fig, d / f"{stem}_dissipation.svg", dict(source=spec.source, delta=_num(delta), lags=args.lags))
    plt.close(fig)
    print(d / f"{stem}_dissipation.csv")
    return EXIT_OK


# --------------------------------------------------------------------------
# mc and tables


def cmd_mc(args) -> int:
    d = out_dir(args.out_dir)
    all_passed = True
    for cfg_path in args.config:
        try:
            experiments = harness.load_config(cfg_path)
        except OSError as exc:
            raise UsageError(f"cannot read {cfg_path}: {exc.strerror}") from exc
        for i, cfg in enumerate(experiments):
            if args.only and cfg.name not in args.only:
                continue
            report = harness.run_experiment(cfg, args.workers)
            doc = report.to_dict()
            doc["generated_at"] = datetime.now(timezone.utc).isoformat()
            name = cfg.name or f"{Path(cfg_path).stem}_{i}_{cfg.kind}"
            write_json(d / f"{name}.json", doc)
            for c in report.criteria:
                flag = "INFO" if c["informational"] else ("PASS" if c["passed"] else "FAIL")
                print(f"[{flag}] {name}: {c['name']} = {c['value']} (tolerance {c['tolerance']})")
            all_passed &= report.passed
    return EXIT_OK if all_passed else EXIT_FAILED


def critical_value_table() -> dict:
    table = inf.cvm_table()
    return dict(
        levels=list(inf.STANDARD_LEVELS),
        ks={str(a): inf.ks_quantile(1 - a) for a in inf.STANDARD_LEVELS},
        cvm={str(a): inf.cvm_quantile(1 - a) for a in inf.STANDARD_LEVELS},
        cvm_series={str(a): inf.cvm_quantile(1 - a, "series") for a in inf.STANDARD_LEVELS},
        cvm_table_provenance=dict(table.header),
    )


def cmd_tables(args) -> int:
    t = critical_value_table()
    prov = t["cvm_table_provenance"]
    rows = [f"# ks: Kolmogorov series inverted by root finding",
            f"# cvm: bridge Monte Carlo table " + " ".join(f"{k}={v}" for k, v in prov.items()),
            f"# cvm_series: Bessel series for the limit law",
            "level,ks,cvm,cvm_series"]
    for a in t["levels"]:
        rows.append(f"{a!r},{t['ks'][str(a)]!r},{t['cvm'][str(a)]!r},{t['cvm_series'][str(a)]!r}")
    text = "\n".join(rows) + "\n"
    if args.out_dir or os.environ.get(OUT_DIR_ENV):
        d = out_dir(args.out_dir)
        (d / "critical_values.csv").write_text(text)
        write_json(d / "critical_values.json", t)
    sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relvar", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--version", action="version", version=f"relvar {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a path and write it as CSV")
    s.add_argument("--model", choices=["bss", "bm"], default="bss")
    s.add_argument("--nu", type=float, default=None, help="BSS smoothness (default 5/6)")
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--sigma", default="const:1",
                   help="const:L | piecewise:b1,..:l0,l1,.. | sin:base:amp:period | expou:mean:rev:volvol")
    s.add_argument("--drift", type=float, default=0.0, help="constant drift rate (0 = none)")
    s.add_argument("--n", type=int, default=4000, help="number of observations (rows)")
    s.add_argument("--delta", type=float, default=None, help="sampling interval (default 1/(n-1))")
    s.add_argument("--refinement", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replicate", type=int, default=0)
    s.add_argument("--out", default=None, help="output file (default <out-dir>/path_<model>_seed<seed>.csv)")
    s.add_argument("--out-dir", default=None)
    s.set_defaults(func=cmd_simulate)

    def ingest(p):
        p.add_argument("input")
        p.add_argument("--delta", type=float, default=None,
                       help="sampling interval; defaults to the file's '# delta=' header or time column")
        p.add_argument("--log", action="store_true", help="analyse log values")
        p.add_argument("--out-dir", default=None)
        p.add_argument("--name", default=None, help="output file stem (default: input stem)")

    a = sub.add_parser("analyze", help="subperiod analysis: nu estimate, band and tests")
    ingest(a)
    a.add_argument("--subsample", type=int, default=1, help="use every k-th observation")
    a.add_argument("--subperiod", type=float, default=None, help="subperiod length in time units")
    a.add_argument("--power", type=float, default=2.0)
    a.add_argument("--level", type=float, default=0.05)
    a.add_argument("--mode", choices=["sm", "bss"], default="sm",
                   help="sm: semimartingale lambda; bss: lambda_p(nu_hat) plug-in")
    a.add_argument("--min-increments", type=int, default=100)
    a.add_argument("--no-plot", action="store_true")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("dissipation", help="accumulated relative quadratic variation curves")
    ingest(d)
    d.add_argument("--lags", default="1", help="comma-separated lag multiples, e.g. 1,4")
    d.set_defaults(func=cmd_dissipation)

    m = sub.add_parser("mc", help="run Monte Carlo experiments")
    m.add_argument("config", nargs="+")
    m.add_argument("--only", nargs="*", default=None, help="experiment names to run")
    m.add_argument("--workers", type=int, default=None)
    m.add_argument("--out-dir", default=None)
    m.set_defaults(func=cmd_mc)

    t = sub.add_parser("tables", help="KS and CvM critical values at 10%%, 5%%, 1%%")
    t.add_argument("--out-dir", default=None)
    t.set_defaults(func=cmd_tables)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"relvar {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InputError, DomainError) as exc:
        print(f"relvar {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
