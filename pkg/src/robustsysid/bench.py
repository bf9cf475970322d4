"""Monte Carlo comparison of the identification methods, plus FIT metrics.

Every run ``r`` draws its system, input and noise from independent Philox
streams keyed by ``(seed, r, stream)``; runs can therefore be executed in any
order or in parallel and still produce identical reports.
"""

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .baseline import estimate_noise_variance, fit_ss_ml
from .em import EMOptions, run_em
from .exceptions import ParameterError
from .noise_models import DEFAULT_NU_GRID, Grouping, NoiseModel, sample_noise
from .signals import (Dataset, make_rng, random_system, sample_outlier_noise,
                      toeplitz_regressor)

BASE_METHODS = ("em-l", "em-s", "ss-ml", "em-s-opt")
_SYSTEM, _INPUT, _NOISE, _OUTLIERS = range(4)


def fit_score(g_true, g_hat):
    """``1 - |g_true - g_hat| / |g_true|``."""
    g_true = np.asarray(g_true, dtype=float)
    g_hat = np.asarray(g_hat, dtype=float)
    if g_true.shape != g_hat.shape:
        raise ParameterError("impulse responses must have equal lengths")
    norm = np.linalg.norm(g_true)
    if norm == 0:
        raise ParameterError("true impulse response is identically zero")
    return 1.0 - np.linalg.norm(g_true - g_hat) / norm


def prediction_fit(y_test, y_pred):
    """``1 - |y - y_pred| / |y - mean(y)|``; negative when worse than the mean."""
    y_test = np.asarray(y_test, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_test.shape != y_pred.shape:
        raise ParameterError("prediction and test outputs must have equal lengths")
    spread = np.linalg.norm(y_test - y_test.mean())
    if spread == 0:
        raise ParameterError("test output is constant")
    return 1.0 - np.linalg.norm(y_test - y_pred) / spread


def parse_method(name):
    """Split ``'em-s-fixed:5'`` into ``('em-s-fixed', 5.0)``; validates the name."""
    name = name.strip().lower()
    base, _, arg = name.partition(":")
    if base in BASE_METHODS and not arg:
        return base, None
    try:
        if base == "em-s-fixed":
            nu = float(arg)
            if not nu > 2:
                raise ValueError
            return base, nu
        if base == "em-l-p":
            p = int(arg)
            if p < 1:
                raise ValueError
            return base, p
    except ValueError:
        pass
    raise ParameterError(f"unknown method {name!r}")


def parse_scenario(text):
    """``'mixture'`` or ``'student:<nu>'``."""
    text = text.strip().lower()
    if text == "mixture":
        return "mixture", None
    kind, _, arg = text.partition(":")
    if kind == "student":
        try:
            nu = float(arg)
        except ValueError:
            nu = float("nan")
        if nu > 2:
            return "student", nu
    raise ParameterError(f"unknown noise scenario {text!r}")


@dataclass(frozen=True)
class BenchConfig:
    """Monte Carlo setup.

    ``noise_fraction`` sets the nominal noise variance relative to the
    noiseless output variance of each run. ``sigma2_source`` is
    ``'estimated'`` (long FIR fit, as a user would do) or ``'true'``.
    """

    runs: int = 100
    N: int = 200
    n: int = 50
    order: int = 30
    c: float = 0.1
    noise_fraction: float = 0.1
    methods: tuple = ("em-l", "em-s", "ss-ml")
    seed: int = 0
    scenario: str = "mixture"
    sigma2_source: str = "estimated"
    max_iter: int = 200
    tol: float = 1e-3
    jobs: int = 1
    record_timing: bool = True

    def __post_init__(self):
        if self.runs < 1:
            raise ParameterError("runs must be at least 1")
        if not 0.0 <= self.c <= 1.0:
            raise ParameterError("outlier probability must lie in [0, 1]")
        if not self.methods:
            raise ParameterError("at least one method is required")
        if self.sigma2_source not in ("estimated", "true"):
            raise ParameterError("sigma2_source must be 'estimated' or 'true'")
        for m in self.methods:
            parse_method(m)
        parse_scenario(self.scenario)


@dataclass
class RunRecord:
    run: int
    method: str
    fit: float
    iterations: int
    wall_time_s: float
    error: str = None


def simulate_run(config, r):
    """System, dataset and nominal noise variance of run ``r``."""
    system = random_system(config.order, config.seed, n=config.n, stream=(r, _SYSTEM))
    u = make_rng(config.seed, r, _INPUT).standard_normal(config.N)
    y0 = toeplitz_regressor(u, config.n) @ system.g
    sigma2 = config.noise_fraction * float(np.var(y0))
    kind, nu = parse_scenario(config.scenario)
    if kind == "mixture":
        v = sample_outlier_noise(sigma2, config.c, config.N, config.seed, (r, _NOISE))
    else:
        v = sample_noise(NoiseModel.student(sigma2, nu), config.N, config.seed, (r, _NOISE))
    return system, Dataset(u, y0 + v), sigma2


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def run_single(config, r):
    """Fit every configured method on run ``r``'s data."""
    system, data, sigma2_nominal = simulate_run(config, r)
    g = system.g
    records = []
    try:
        if config.sigma2_source == "true":
            s2 = sigma2_nominal
        else:
            s2 = estimate_noise_variance(data, n=config.n)
        ss, t_ss = _timed(lambda: fit_ss_ml(data, config.n, s2))
    except Exception as exc:  # the whole run is unusable
        return [RunRecord(r, m, math.nan, 0, 0.0, f"{type(exc).__name__}: {exc}")
                for m in config.methods]

    def em(model, grouping=None):
        opts = EMOptions(max_iter=config.max_iter, rel_tol=config.tol, grouping=grouping)
        return run_em(data, config.n, model, opts, theta0=ss.theta)

    for name in config.methods:
        base, arg = parse_method(name)
        try:
            if base == "ss-ml":
                est, dt = ss, t_ss
            elif base == "em-l":
                est, dt = _timed(lambda: em(NoiseModel.laplacian(s2)))
            elif base == "em-s":
                est, dt = _timed(lambda: em(NoiseModel.student_auto(s2)))
            elif base == "em-s-fixed":
                est, dt = _timed(lambda: em(NoiseModel.student(s2, arg)))
            elif base == "em-l-p":
                est, dt = _timed(lambda: em(NoiseModel.laplacian(s2), Grouping(config.N, arg)))
            else:  # em-s-opt: oracle nu picked by true FIT
                t0 = time.perf_counter()
                est = max((em(NoiseModel.student(s2, nu)) for nu in DEFAULT_NU_GRID),
                          key=lambda e: fit_score(g, e.g_hat))
                dt = time.perf_counter() - t0
            dt = dt + (t_ss if base != "ss-ml" else 0.0)
            records.append(RunRecord(r, name, float(fit_score(g, est.g_hat)), est.n_iter,
                                     dt if config.record_timing else 0.0))
        except Exception as exc:
            records.append(RunRecord(r, name, math.nan, 0, 0.0,
                                     f"{type(exc).__name__}: {exc}"))
    return records


def _run_single_star(args):
    return run_single(*args)


@dataclass
class FitReport:
    config: BenchConfig
    records: list = field(default_factory=list)

    def fits(self, method):
        """FIT values of ``method`` in run order (NaN for failed runs)."""
        return np.array([rec.fit for rec in self.records if rec.method == method])

    def summary(self):
        """Per-method mean/median/95% CI half-width and pairwise paired t-tests.

        For each pair ``(a, b)`` taken in configured method order, ``t_stat`` and
        the one-tailed ``p_value`` test ``mean FIT(a) > mean FIT(b)``.
        The ``pairwise`` key is absent with a single method.
        """
        out = {"runs": self.config.runs, "methods": {}}
        for m in self.config.methods:
            f = self.fits(m)
            ok = f[np.isfinite(f)]
            k = ok.size
            half = (stats.t.ppf(0.975, k - 1) * ok.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
            out["methods"][m] = {
                "mean": float(ok.mean()) if k else math.nan,
                "median": float(np.median(ok)) if k else math.nan,
                "ci95_halfwidth": float(half),
                "n_ok": int(k),
            }
        methods = list(self.config.methods)
        if len(methods) > 1:
            pairs = []
            for i, a in enumerate(methods):
                for b in methods[i + 1:]:
                    fa, fb = self.fits(a), self.fits(b)
                    keep = np.isfinite(fa) & np.isfinite(fb)
                    diff = fa[keep] - fb[keep]
                    if diff.size > 1 and np.any(diff != diff[0]):
                        res = stats.ttest_rel(fa[keep], fb[keep], alternative="greater")
                        t_stat, p = float(res.statistic), float(res.pvalue)
                    else:
                        t_stat = p = math.nan
                    pairs.append({"a": a, "b": b,
                                  "mean_diff": float(diff.mean()) if diff.size else math.nan,
                                  "t_stat": t_stat, "p_value": p})
            out["pairwise"] = pairs
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "method", "fit", "iterations", "wall_time_s"])
            for rec in self.records:
                w.writerow([rec.run, rec.method, repr(rec.fit), rec.iterations,
                            repr(rec.wall_time_s)])

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(_nan_to_none(self.summary()), fh, indent=2)
            fh.write("\n")


def _nan_to_none(obj):
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def run_monte_carlo(config, progress=None):
    """Run all Monte Carlo runs; records are ordered by run then method.

    ``config.jobs > 1`` spreads runs over worker processes. ``progress`` is an
    optional callable receiving each finished run index.
    """
    args = [(config, r) for r in range(config.runs)]
    report = FitReport(config)
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = pool.map(_run_single_star, args)
            for r, recs in enumerate(chunks):
                report.records.extend(recs)
                if progress:
                    progress(r)
    else:
        for r, a in enumerate(args):
            report.records.extend(_run_single_star(a))
            if progress:
                progress(r)
    return report


def introductory_example(seed=1, N=100, n=50, n_outliers=5, noise_fraction=0.001):
    """Known system observed with low noise, and the same data with outliers.

    Returns ``(system, clean, contaminated, sigma2)``. The contaminated
    dataset replaces the noise by ``N(0, 100 sigma2)`` draws at ``n_outliers`` random samples.
    """
    system = random_system(30, seed, n=n, stream=(0, _SYSTEM))
    u = make_rng(seed, 0, _INPUT).standard_normal(N)
    y0 = toeplitz_regressor(u, n) @ system.g
    sigma2 = noise_fraction * float(np.var(y0))
    rng = make_rng(seed, 0, _NOISE)
    v = np.sqrt(sigma2) * rng.standard_normal(N)
    clean = Dataset(u, y0 + v)
    idx = make_rng(seed, 0, _OUTLIERS).choice(N, size=n_outliers, replace=False)
    v_out = v.copy()
    v_out[idx] = 10.0 * np.sqrt(sigma2) * rng.standard_normal(n_outliers)
    return system, clean, Dataset(u, y0 + v_out), sigma2


def config_dict(config):
    d = asdict(config)
    d["methods"] = list(config.methods)
    return d
