"""Scenario generation and the Monte Carlo studies.

Every study is a pure function of its inputs and ``seed``. Randomness comes
from Philox streams keyed by ``SeedSequence(seed, spawn_key=(stream, rep))``,
so replication ``r`` draws the same numbers whatever the thread count, and
results are reduced in replication order.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InputFormatError, RiskSetError, StudyPreconditionError
from .estimators import asymptotic_variance_oracle, estimate, influence_at_truth
from .process import DESIGNS, LatentSample, Sample, mean_of_events
from .stepfn import pvar_distance_to_truth
from .truth import TruthSpec, describe_truth

log = logging.getLogger(__name__)

# stream ids keep the studies' random numbers disjoint
_STREAM_GENERATE = 0
_STREAM_CONVERGENCE = 1
_STREAM_PROP1 = 2
_STREAM_ASBOUND = 3
_STREAM_COVERAGE = 4
_STREAM_INFLUENCE = 5


def rng_for(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Scenario:
    truth: TruthSpec
    n: int
    seed: int = 0
    design: str = "observed"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}")


def draw_latent(truth: TruthSpec, n: int, rng: np.random.Generator) -> LatentSample:
    """Draw ``n`` independent ``(N, T, C, Z)``; vectorised, fixed draw order."""
    t = rng.exponential(1.0 / truth.terminal_rate, n) if truth.terminal_rate > 0 else np.full(n, math.inf)
    c = rng.exponential(1.0 / truth.censor_rate, n) if truth.censor_rate > 0 else np.full(n, math.inf)
    z = (rng.random(n) < truth.z_prob).astype(float) if truth.has_covariate else None
    rate = truth.rate_for(z) if z is not None else np.full(n, truth.event_rate)
    length = np.minimum(truth.horizon, t)
    counts = rng.poisson(rate * length)
    owner = np.repeat(np.arange(n), counts)
    times = rng.random(owner.size) * length[owner]
    # a zero draw has probability zero but would break the N(0) = 0 convention
    times = np.where(times > 0, times, np.nextafter(0.0, 1.0))
    order = np.lexsort((times, owner))
    owner, times = owner[order], times[order]
    if truth.cap is not None:
        first = np.concatenate(([0], np.cumsum(counts)[:-1]))
        rank = np.arange(owner.size) - first[owner]
        keep = rank < truth.cap
        owner, times = owner[keep], times[keep]
    return LatentSample(owner, times, c, t, z)


def generate(scenario: Scenario, replication: int = 0) -> tuple[Sample, LatentSample]:
    """Observed sample for ``scenario.design`` plus the latent data behind it."""
    rng = rng_for(scenario.seed, _STREAM_GENERATE, replication)
    latent = draw_latent(scenario.truth, scenario.n, rng)
    return latent.observe(scenario.design), latent


def true_mean(truth: TruthSpec, s):
    """mu(s) = rate * E(min(s, T)) for s in [0, tau] (capped/mixed variants too)."""
    return truth.mean(s)


def _map(fn: Callable[[int], object], count: int, threads: int) -> list:
    if threads <= 1 or count <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def ols_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of ``y`` on ``x`` and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    resid = y - y.mean() - slope * xc
    dof = max(x.size - 2, 1)
    se = float(math.sqrt(np.dot(resid, resid) / dof / np.dot(xc, xc)))
    return slope, se


# -- rate studies ----------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    p: float
    statistic: str  # "norm" for ||F_n - F||_[p], "v_p" for v_p(F_n - F)
    n_list: tuple
    B: int
    mean_norms: tuple
    se_norms: tuple
    fitted_slope: float
    slope_se: float
    theoretical_slope: float
    prop1: ConvergenceReport | None = None

    def rows(self) -> list[dict]:
        return [
            {"n": n, "mean": m, "se": s}
            for n, m, s in zip(self.n_list, self.mean_norms, self.se_norms)
        ]

    def summary(self) -> str:
        label = "||F_n - F||_[p]" if self.statistic == "norm" else "v_p(F_n - F)"
        lines = [
            f"statistic {label}, p={self.p:g}, B={self.B}",
            f"fitted slope {self.fitted_slope:.9g} (se {self.slope_se:.3g}), "
            f"theoretical {self.theoretical_slope:.9g}",
        ]
        if self.prop1 is not None:
            lines.append(self.prop1.summary())
        return "\n".join(lines)


def _check_rate_inputs(p, n_list, B):
    if not 1.0 <= p < 2.0:
        raise StudyPreconditionError(f"p must lie in [1, 2), got {p}")
    if len(n_list) < 3:
        raise StudyPreconditionError("a slope fit needs at least three sample sizes")
    if any(int(n) < 1 for n in n_list) or B < 1:
        raise StudyPreconditionError("sample sizes and B must be positive")


def _rate_report(p, statistic, n_list, B, table, theoretical) -> ConvergenceReport:
    table = np.asarray(table)  # (B, len(n_list))
    means = table.mean(axis=0)
    ses = table.std(axis=0, ddof=1) / math.sqrt(B) if B > 1 else np.zeros_like(means)
    if np.any(means <= 0):
        raise StudyPreconditionError("mean statistic is zero; the slope is undefined")
    slope, slope_se = ols_slope(np.log(n_list), np.log(means))
    return ConvergenceReport(
        p=float(p),
        statistic=statistic,
        n_list=tuple(int(n) for n in n_list),
        B=int(B),
        mean_norms=tuple(float(m) for m in means),
        se_norms=tuple(float(s) for s in ses),
        fitted_slope=slope,
        slope_se=slope_se,
        theoretical_slope=float(theoretical),
    )


def convergence_study(
    truth: TruthSpec,
    p: float,
    n_list: Sequence[int],
    B: int,
    seed: int = 0,
    *,
    threads: int = 1,
    with_prop1: bool = False,
) -> ConvergenceReport:
    """Mean of ``||F_n - F||_[p]`` on ``[0, tau]`` against ``n`` for uncensored paths.

    The log-log OLS slope estimates the rate exponent ``(1 - p) / p``.
    """
    _check_rate_inputs(p, n_list, B)
    n_list = [int(n) for n in n_list]

    def one(rep: int):
        out = []
        for k, n in enumerate(n_list):
            latent = draw_latent(truth, n, rng_for(seed, _STREAM_CONVERGENCE, k, rep))
            F_n = mean_of_events(latent.event_time, n)
            out.append(pvar_distance_to_truth(F_n, truth.mean, p, truth.horizon).norm_p)
        return out

    report = _rate_report(p, "norm", n_list, B, _map(one, B, threads), (1.0 - p) / p)
    if with_prop1:
        report = replace(report, prop1=prop1_study(p, n_list, B, seed, threads=threads))
    return report


def prop1_study(
    p: float,
    n_list: Sequence[int],
    B: int,
    seed: int = 0,
    *,
    rate: float = 1.0,
    threads: int = 1,
) -> ConvergenceReport:
    """Mean of ``v_p(F_n - F)`` for the empirical CDF of ``Exp(rate)`` draws.

    Computed on ``[0, inf)``; the slope estimates ``1 - p``.
    """
    _check_rate_inputs(p, n_list, B)
    n_list = [int(n) for n in n_list]

    def cdf(t):
        return -np.expm1(-rate * np.asarray(t, dtype=float))

    def one(rep: int):
        out = []
        for k, n in enumerate(n_list):
            x = rng_for(seed, _STREAM_PROP1, k, rep).exponential(1.0 / rate, n)
            F_n = mean_of_events(x, n)
            out.append(pvar_distance_to_truth(F_n, cdf, p, math.inf).v_p)
        return out

    return _rate_report(p, "v_p", n_list, B, _map(one, B, threads), 1.0 - p)


@dataclass(frozen=True)
class AsBoundReport:
    p: float
    n_max: int
    burn_in: int
    n_values: np.ndarray = field(repr=False)
    scaled: np.ndarray = field(repr=False)  # r_n = n^{(p-1)/p} ||F_n - F||_[p]
    max_scaled: float
    argmax_n: int
    stabilized: bool

    def summary(self) -> str:
        verdict = "stabilized" if self.stabilized else "NOT stabilized"
        return (
            f"p={self.p:g}, n_max={self.n_max}: max r_n over [{self.burn_in}, {self.n_max}] "
            f"= {self.max_scaled:.9g} at n={self.argmax_n}; running max {verdict} "
            f"(no new maximum after n={self.n_max // 2})"
        )


def as_bound_study(
    truth: TruthSpec,
    p: float,
    n_max: int,
    seed: int = 0,
    *,
    burn_in: int = 100,
    stride: int = 1,
) -> AsBoundReport:
    """Track ``r_n = n^{(p-1)/p} ||F_n - F||_[p]`` along one growing sample.

    ``stride > 1`` evaluates every ``stride``-th ``n`` only (plus ``n_max``).
    """
    if not truth.is_bounded:
        raise StudyPreconditionError("the almost-sure study needs a bounded process (set cap)")
    if not 1.0 <= p < 2.0:
        raise StudyPreconditionError(f"p must lie in [1, 2), got {p}")
    if n_max < 2 * burn_in:
        raise StudyPreconditionError("n_max must be at least twice the burn-in")
    latent = draw_latent(truth, n_max, rng_for(seed, _STREAM_ASBOUND, 0))
    ns = np.union1d(np.arange(1, n_max + 1, stride), [n_max])
    # events sorted by owner, so the first n subjects own a prefix of the events
    ends = np.searchsorted(latent.event_owner, ns, side="left")
    scaled = np.empty(ns.size)
    for k, (n, end) in enumerate(zip(ns, ends)):
        F_n = mean_of_events(latent.event_time[:end], int(n))
        dist = pvar_distance_to_truth(F_n, truth.mean, p, truth.horizon).norm_p
        scaled[k] = n ** ((p - 1.0) / p) * dist
    window = ns >= burn_in
    w_n, w_r = ns[window], scaled[window]
    j = int(np.argmax(w_r))
    return AsBoundReport(
        p=float(p),
        n_max=int(n_max),
        burn_in=int(burn_in),
        n_values=ns,
        scaled=scaled,
        max_scaled=float(w_r[j]),
        argmax_n=int(w_n[j]),
        stabilized=bool(w_n[j] <= n_max // 2),
    )


# -- estimator studies ----------------------------------------------------------------


@dataclass(frozen=True)
class DesignSummary:
    design: str
    coverage: float
    mean_plugin_var: float
    empirical_var: float
    var_ratio: float
    failures: int
    oracle_var: float | None
    mean_estimate: float

    def line(self) -> str:
        oracle = "n/a" if self.oracle_var is None else f"{self.oracle_var:.9g}"
        return (
            f"{self.design:>9}: coverage {self.coverage:.4f}, plug-in var {self.mean_plugin_var:.9g}, "
            f"empirical var {self.empirical_var:.9g}, ratio {self.var_ratio:.4f}, oracle {oracle}, "
            f"failures {self.failures}"
        )


@dataclass(frozen=True)
class CoverageReport:
    truth: TruthSpec
    t: float
    n: int
    B: int
    true_mu: float
    designs: dict
    replications: list = field(repr=False)  # dict rows: rep, design, mu_hat, var_hat, lower, upper, covered
    variance_gap: float | None = None  # empirical var(observed) - var(censored), paired
    variance_gap_se: float | None = None
    oracle_gap: float | None = None

    def summary(self) -> str:
        lines = [f"{describe_truth(self.truth)}; t={self.t:g}, n={self.n}, B={self.B}, mu(t)={self.true_mu:.9g}"]
        lines += [d.line() for d in self.designs.values()]
        if self.variance_gap is not None:
            lines.append(
                f"variance gap observed - censored: {self.variance_gap:.9g} "
                f"(se {self.variance_gap_se:.3g}), oracle {self.oracle_gap:.9g}"
            )
        return "\n".join(lines)


Z95 = 1.959963984540054


def coverage_and_variance_study(
    truth: TruthSpec,
    design: str,
    t: float,
    n: int,
    B: int,
    seed: int = 0,
    *,
    threads: int = 1,
    both_designs: bool | None = None,
) -> CoverageReport:
    """Wald-interval coverage and plug-in versus Monte Carlo variance at ``t``.

    With a terminal event (or ``both_designs=True``) the observed and censored
    designs are evaluated on the same latent data, so their variance gap is a
    paired comparison.
    """
    if design not in DESIGNS:
        raise StudyPreconditionError(f"unknown design {design!r}")
    if not 0 < t <= truth.horizon:
        raise StudyPreconditionError("t must lie in (0, tau]")
    if design != "uncensored" and truth.censor_rate > 0 and truth.censor_rate * t > 50:
        raise StudyPreconditionError("K(t) is numerically zero")
    if both_designs is None:
        both_designs = truth.terminal_rate > 0 and design != "uncensored"
    designs = ("observed", "censored") if both_designs else (design,)
    mu_t = float(truth.mean(t))

    def one(rep: int):
        latent = draw_latent(truth, n, rng_for(seed, _STREAM_COVERAGE, rep))
        out = {}
        for d in designs:
            try:
                curve = estimate(latent.observe(d), t, [t])
                out[d] = (float(curve.mu_grid[0]), float(curve.variance[0]))
            except RiskSetError:
                out[d] = None
        return out

    results = _map(one, B, threads)
    rows, summaries = [], {}
    for d in designs:
        est, var = [], []
        failures = 0
        for rep, res in enumerate(results):
            if res[d] is None:
                failures += 1
                rows.append({"rep": rep, "design": d, "mu_hat": math.nan, "var_hat": math.nan,
                             "lower": math.nan, "upper": math.nan, "covered": ""})
                continue
            m, v = res[d]
            half = Z95 * math.sqrt(v / n)
            covered = m - half <= mu_t <= m + half
            est.append(m)
            var.append(v)
            rows.append({"rep": rep, "design": d, "mu_hat": m, "var_hat": v,
                         "lower": m - half, "upper": m + half, "covered": int(covered)})
        est = np.asarray(est)
        var = np.asarray(var)
        half = Z95 * np.sqrt(var / n)
        coverage = float(np.mean(np.abs(est - mu_t) <= half)) if est.size else math.nan
        emp = float(np.var(math.sqrt(n) * (est - mu_t), ddof=1)) if est.size > 1 else math.nan
        plug = float(var.mean()) if var.size else math.nan
        oracle = None
        if not truth.has_covariate and truth.cap is None:
            oracle = asymptotic_variance_oracle(truth, t, d)
        summaries[d] = DesignSummary(d, coverage, plug, emp, plug / emp, failures, oracle,
                                     float(est.mean()) if est.size else math.nan)

    gap = gap_se = oracle_gap = None
    if both_designs:
        paired = [r for r in results if r["observed"] is not None and r["censored"] is not None]
        x = math.sqrt(n) * (np.array([r["observed"][0] for r in paired]) - mu_t)
        y = math.sqrt(n) * (np.array([r["censored"][0] for r in paired]) - mu_t)
        xc, yc = x - x.mean(), y - y.mean()
        diff = xc**2 - yc**2
        gap = float(np.var(x, ddof=1) - np.var(y, ddof=1))
        gap_se = float(diff.std(ddof=1) / math.sqrt(diff.size))
        if summaries["observed"].oracle_var is not None:
            oracle_gap = summaries["observed"].oracle_var - summaries["censored"].oracle_var
    return CoverageReport(truth, float(t), int(n), int(B), mu_t, summaries, rows, gap, gap_se, oracle_gap)


@dataclass(frozen=True)
class InfluenceReport:
    design: str
    s: float
    draws: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    oracle: float


def influence_study(truth: TruthSpec, design: str, s: float, draws: int, seed: int = 0) -> InfluenceReport:
    """Monte Carlo mean and variance of the influence function at the truth."""
    latent = draw_latent(truth, draws, rng_for(seed, _STREAM_INFLUENCE, 0))
    x = influence_at_truth(latent, truth, s, design)
    sq = (x - x.mean()) ** 2
    return InfluenceReport(
        design=design,
        s=float(s),
        draws=int(draws),
        mean=float(x.mean()),
        mean_se=float(x.std(ddof=1) / math.sqrt(draws)),
        variance=float(x.var(ddof=1)),
        variance_se=float(sq.std(ddof=1) / math.sqrt(draws)),
        oracle=float(asymptotic_variance_oracle(truth, s, design)),
    )


# -- configuration -----------------------------------------------------------------

CONFIG_KEYS = {
    "lambda", "censor_rate", "terminal_rate", "tau", "n", "n_list", "B", "p", "t",
    "design", "seed", "z_prob", "z_multiplier", "cap", "n_max", "stride", "burn_in",
}


@dataclass(frozen=True)
class StudyConfig:
    truth: TruthSpec
    n: int = 200
    n_list: tuple = (25, 50, 100, 200, 400, 800, 1600, 3200)
    B: int = 500
    p: float = 1.5
    t: float = 2.0
    design: str = "observed"
    seed: int = 0
    n_max: int = 10_000
    stride: int = 1
    burn_in: int = 100

    def to_dict(self) -> dict:
        d = asdict(self)
        d["truth"] = asdict(self.truth)
        return d


def parse_config(text: str) -> StudyConfig:
    """Parse a flat JSON object of study settings."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"config is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise InputFormatError("config must be a flat JSON object")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise InputFormatError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        truth = TruthSpec(
            event_rate=float(raw.get("lambda", 1.0)),
            censor_rate=float(raw.get("censor_rate", 0.0)),
            terminal_rate=float(raw.get("terminal_rate", 0.0)),
            horizon=float(raw.get("tau", 5.0)),
            z_prob=None if raw.get("z_prob") is None else float(raw["z_prob"]),
            z_multiplier=float(raw.get("z_multiplier", 1.0)),
            cap=None if raw.get("cap") is None else int(raw["cap"]),
        )
        kw = {}
        for key, conv in (("n", int), ("B", int), ("p", float), ("t", float), ("design", str),
                          ("seed", int), ("n_max", int), ("stride", int), ("burn_in", int)):
            if key in raw:
                kw[key] = conv(raw[key])
        if "n_list" in raw:
            kw["n_list"] = tuple(int(v) for v in raw["n_list"])
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"bad config value: {exc}") from None
    cfg = StudyConfig(truth=truth, **kw)
    if cfg.design not in DESIGNS:
        raise InputFormatError(f"unknown design {cfg.design!r}")
    if cfg.n < 1:
        raise InputFormatError("n must be >= 1")
    return cfg


def load_config(path) -> StudyConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFormatError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
