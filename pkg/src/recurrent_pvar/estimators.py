"""Mean-function estimators for recurrent events under censoring.

Three estimators of ``mu(s) = E N(s)`` on ``[0, horizon]``:

* :func:`mean_uncensored` -- plain average of fully observed paths;
* :func:`mu_ipcw_observed` -- inverse probability of censoring weighting with
  the censoring times ``C_i`` observed;
* :func:`mu_ipcw_censored` -- the same weighting, but with ``K`` estimated by
  a (left-continuous) Kaplan-Meier estimator of the censoring distribution
  because a terminal event may hide ``C``.

Each returns an :class:`EstimateCurve` carrying the per-subject influence
values ``mu'_{F_n}(delta_{X_i} - F_n; s)`` and the plug-in variance
``n^{-1} sum_i influence_i(s)^2``.

The module also holds the truth-side quantities used by the simulation
studies: the influence function at the true nuisance functions and the
closed-form asymptotic variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import integrate

from .errors import InputFormatError, RiskSetError
from .process import LatentSample, Sample
from .stepfn import StepFunction, product_integral
from .truth import TruthSpec, _int_exp

EstimatorKind = Literal["uncensored", "ipcw_observed", "ipcw_censored"]
KIND_FOR_DESIGN = {
    "uncensored": "uncensored",
    "observed": "ipcw_observed",
    "censored": "ipcw_censored",
}


@dataclass(frozen=True, eq=False)
class EstimateCurve:
    """Estimator output on ``[0, horizon]``.

    ``k_hat`` is stored right-continuously; the censoring survivor used by
    the estimator is its left limit, see :meth:`k_hat_at`.
    """

    design: str
    horizon: float
    n: int
    mu_hat: StepFunction
    k_hat: StepFunction
    lambda_hat: StepFunction | None
    grid: np.ndarray
    variance: np.ndarray
    influence: np.ndarray | None = field(repr=False, default=None)

    def mu_at(self, s):
        return self.mu_hat(s)

    def k_hat_at(self, s):
        return self.k_hat.left_limit(s)

    @property
    def mu_grid(self) -> np.ndarray:
        return np.asarray(self.mu_hat(self.grid))

    @property
    def se(self) -> np.ndarray:
        """Standard error of mu_hat(s): sqrt(variance / n)."""
        return np.sqrt(self.variance / self.n)


def default_grid(mu_hat: StepFunction, horizon: float) -> np.ndarray:
    """Jump points of ``mu_hat`` in ``(0, horizon]`` plus ``horizon``."""
    t = mu_hat.times[mu_hat.times <= horizon]
    return np.union1d(t, [horizon])


def _check_grid(grid, horizon) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("empty evaluation grid")
    if np.any(grid < 0) or np.any(grid > horizon):
        raise ValueError("grid points must lie in [0, horizon]")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def _check_horizon(horizon) -> float:
    horizon = float(horizon)
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ValueError("horizon must be a positive finite time")
    return horizon


def _weights(sample: Sample, weights) -> tuple[np.ndarray, float]:
    """Per-subject masses and their total; unit masses unless weights given."""
    if weights is None:
        return np.ones(sample.n), float(sample.n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (sample.n,):
        raise ValueError("one weight per subject required")
    return w, float(w.sum())


def _nu_jumps(sample: Sample, horizon: float, w, total):
    """Jump times, sizes and raw masses of nu_hat (mean of the observed paths) up to horizon."""
    inside = sample.event_time <= horizon
    t = sample.event_time[inside]
    if t.size == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    u, inv = np.unique(t, return_inverse=True)
    mass = np.bincount(inv, weights=w[sample.event_owner[inside]], minlength=u.size)
    keep = mass != 0.0
    return u[keep], mass[keep] / total, mass[keep]


def _step_at(times, values, x, side="right", initial=0.0):
    """Evaluate the step function with levels ``values`` after ``times``."""
    table = np.concatenate(([initial], values))
    return table[np.searchsorted(times, x, side=side)]


def _event_sums(sample, horizon, weight_of_time, grid):
    """``E[i, g] = sum over events e of i with t_e <= grid[g] of weight(t_e)``."""
    inside = sample.event_time <= horizon
    t = sample.event_time[inside]
    owner = sample.event_owner[inside]
    out = np.zeros((sample.n, grid.size + 1))
    if t.size:
        np.add.at(out, (owner, np.searchsorted(grid, t, side="left")), weight_of_time(t))
    return np.cumsum(out, axis=1)[:, :-1]


def _inverse_at(u, k_u):
    """``t -> 1 / K(t)`` for event times ``t`` that are among the jump times ``u``."""

    def inv(t):
        return 1.0 / k_u[np.searchsorted(u, t)]

    return inv


# -- observed censoring -----------------------------------------------------


def _require(sample: Sample, design: str):
    if sample.design != design:
        raise InputFormatError(f"estimator needs the {design!r} design, sample is {sample.design!r}")


def _k_observed(followup, w, total):
    """``s -> n^{-1} sum 1{C_i >= s}``, plus its right-continuous step form."""
    order = np.argsort(followup, kind="stable")
    c = followup[order]
    tail = np.concatenate((np.cumsum(w[order][::-1])[::-1], [0.0]))

    def k_hat(s):
        return tail[np.searchsorted(c, s, side="left")] / total

    finite = np.isfinite(c)
    step = StepFunction(c[finite], -w[order][finite] / total, 1.0)
    return k_hat, step


def k_hat_observed(sample: Sample, s):
    """Empirical censoring survivor ``n^{-1} sum 1{C_i >= s}``."""
    _require(sample, "observed")
    k_hat, _ = _k_observed(sample.followup, *_weights(sample, None))
    out = k_hat(np.asarray(s, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _ipcw_mu(u, mass, total, k_at_u, where: str) -> StepFunction:
    """``sum_{v <= s} dnu(v) / K(v)``, summing event masses before dividing by ``total``.

    With ``K = 1`` this is bit-identical to the plain average.
    """
    if np.any(k_at_u <= 0.0):
        bad = float(u[np.argmax(k_at_u <= 0.0)])
        raise RiskSetError(f"insufficient follow-up before horizon: {where} is 0 at u={bad:.9g}")
    return StepFunction.from_levels(u, np.cumsum(mass / k_at_u) / total)


def mu_ipcw_observed(sample: Sample, horizon: float, grid=None, *, influence: bool = True) -> EstimateCurve:
    """IPCW estimate with observed censoring times.

    ``mu_hat(s) = sum_{u <= s} dnu_hat(u) / K_hat(u)`` with
    ``K_hat(u) = n^{-1} sum 1{C_i >= u}``. The influence of subject ``i`` is
    the derivative ``int dg_1 / K - int K(g) / K^2 dnu`` at ``F_n`` in the
    direction ``g = delta_{X_i} - F_n``, where ``K(g; u) = 1{C_i >= u} - K_hat(u)``.
    """
    _require(sample, "observed")
    horizon = _check_horizon(horizon)
    w, total = _weights(sample, None)
    u, dnu, mass = _nu_jumps(sample, horizon, w, total)
    k_hat, k_step = _k_observed(sample.followup, w, total)
    k_u = k_hat(u)
    mu = _ipcw_mu(u, mass, total, k_u, "K_hat")
    grid = default_grid(mu, horizon) if grid is None else _check_grid(grid, horizon)

    infl = None
    mu_g = mu(grid)
    if influence:
        # int_0^s g_1(du) / K_hat(u), with g_1 = n_i - nu_hat
        term1 = _event_sums(sample, horizon, _inverse_at(u, k_u), grid) - mu_g
        # int_0^s (1{C_i >= u} - K_hat(u)) / K_hat(u)^2 nu_hat(du)
        h = np.cumsum(dnu / k_u**2)
        upto = np.minimum.outer(sample.followup, grid)
        term2 = _step_at(u, h, upto) - mu_g
        infl = term1 - term2
    return _curve("observed", horizon, sample.n, mu, k_step, None, grid, infl, mu_g)



def _curve(design, horizon, n, mu, k_step, lam, grid, infl, mu_g) -> EstimateCurve:
    if infl is None:
        var = np.full(grid.size, np.nan)
    else:
        var = np.mean(infl**2, axis=0)
    return EstimateCurve(design, horizon, n, mu, k_step, lam, grid, var, infl)


# -- uncensored ---------------------------------------------------------------


def mean_uncensored(sample_or_paths, horizon: float, grid=None, *, influence: bool = True) -> EstimateCurve:
    """Average of fully observed paths; influence ``N_i(s) - mu_hat(s)``."""
    sample = sample_or_paths if isinstance(sample_or_paths, Sample) else Sample.from_paths(sample_or_paths)
    horizon = _check_horizon(horizon)
    w, total = _weights(sample, None)
    u, dnu, mass = _nu_jumps(sample, horizon, w, total)
    # levels from cumulative event counts, so the mean is a single division
    mu = _ipcw_mu(u, mass, total, np.ones_like(u), "K")
    grid = default_grid(mu, horizon) if grid is None else _check_grid(grid, horizon)
    mu_g = mu(grid)
    infl = None
    if influence:
        infl = _event_sums(sample, horizon, np.ones_like, grid) - mu_g
    return _curve(sample.design, horizon, sample.n, mu, StepFunction.constant(1.0), None, grid, infl, mu_g)


# -- censored censoring -------------------------------------------------------


@dataclass(frozen=True)
class _CensoringFit:
    times: np.ndarray  # distinct C~ with D~ = 1, <= horizon
    d_g1: np.ndarray  # jumps of G°_{n,1}
    k_adj: np.ndarray  # K°_n at those times
    d_lambda: np.ndarray  # jumps of Lambda_n

    def lambda_step(self) -> StepFunction:
        return StepFunction(self.times, self.d_lambda)


def _adjusted_at_risk(c_tilde, d_tilde, w, total):
    """``s -> n^{-1} sum (1{C~_i > s} + 1{C~_i = s, D~_i = 1})``."""
    order = np.argsort(c_tilde, kind="stable")
    c = c_tilde[order]
    tail = np.concatenate((np.cumsum(w[order][::-1])[::-1], [0.0]))
    obs = d_tilde[order] == 1
    c1 = c[obs]
    w1 = np.concatenate(([0.0], np.cumsum(w[order][obs])))

    def k_adj(s):
        s = np.asarray(s, dtype=float)
        greater = tail[np.searchsorted(c, s, side="right")]
        tied = w1[np.searchsorted(c1, s, side="right")] - w1[np.searchsorted(c1, s, side="left")]
        return (greater + tied) / total

    return k_adj


def _fit_censoring(sample: Sample, horizon: float, w, total) -> tuple[_CensoringFit, callable]:
    c, d = sample.followup, sample.status
    k_adj = _adjusted_at_risk(c, d, w, total)
    obs = (d == 1) & (c <= horizon)
    if not obs.any():
        empty = np.zeros(0)
        return _CensoringFit(empty, empty, empty, empty), k_adj
    v, inv = np.unique(c[obs], return_inverse=True)
    mass = np.bincount(inv, weights=w[obs], minlength=v.size)
    keep = mass != 0.0
    v, mass = v[keep], mass[keep]
    d_g1 = mass / total
    kv = k_adj(v)
    if np.any(kv <= 0.0):
        raise RiskSetError("adjusted risk set exhausted at an observed censoring time")
    # dG1 <= K° holds exactly; clip the rounding excess of weighted sums
    return _CensoringFit(v, d_g1, kv, np.minimum(d_g1 / kv, 1.0)), k_adj


def censoring_hazard_and_khat(sample: Sample, horizon: float):
    """Censoring hazard ``Lambda_n`` and its left-continuous survivor ``K_n``.

    ``dLambda_n(u) = dG°_{n,1}(u) / K°_n(u)`` at observed censoring times
    ``u <= horizon``; ``K_n(s) = prod_{u < s} (1 - dLambda_n(u))``.
    Returns ``(lambda_hat, k_hat)`` with ``k_hat`` a callable.
    """
    _require(sample, "censored")
    horizon = _check_horizon(horizon)
    fit, _ = _fit_censoring(sample, horizon, *_weights(sample, None))
    lam = fit.lambda_step()

    def k_hat(s):
        return product_integral(lam, s)

    return lam, k_hat


def mu_ipcw_censored(sample: Sample, horizon: float, grid=None, *, influence: bool = True) -> EstimateCurve:
    """IPCW estimate with a Kaplan-Meier censoring survivor.

    The influence of subject ``i`` follows the chain of derivatives at
    ``F_n`` in direction ``g = delta_{X_i} - F_n``:

    * ``dLambda'(v) = dN_{i,1}(v) / K°(v) - Y°_i(v) dLambda(v) / K°(v)`` where
      ``Y°_i(v) = 1{C~_i > v} + 1{C~_i = v, D~_i = 1}``;
    * ``K'(u) = -K(u) Q_i(u-)`` with ``Q_i(u-) = sum_{v<u} dLambda'(v) / (1 - dLambda(v))``;
    * ``mu'(s) = int_0^s dg_1 / K + int_0^s Q_i(u-) mu_hat(du)``.
    """
    _require(sample, "censored")
    horizon = _check_horizon(horizon)
    w, total = _weights(sample, None)
    fit, k_adj = _fit_censoring(sample, horizon, w, total)
    u, dnu, mass = _nu_jumps(sample, horizon, w, total)
    lam = fit.lambda_step()
    k_u = product_integral(lam, u)
    mu = _ipcw_mu(u, mass, total, k_u, "K_hat")
    grid = default_grid(mu, horizon) if grid is None else _check_grid(grid, horizon)
    k_step = StepFunction.from_levels(fit.times, np.cumprod(1.0 - fit.d_lambda), 1.0) if fit.times.size else StepFunction.constant(1.0)

    mu_g = mu(grid)
    infl = None
    if influence:
        c, d = sample.followup, sample.status
        term1 = _event_sums(sample, horizon, _inverse_at(u, k_u), grid) - mu_g

        # A(x-) = sum_{v < x} dLambda(v) / (K°(v) (1 - dLambda(v))); a unit jump
        # only occurs after the last event, where it never multiplies a mu jump.
        dl = fit.d_lambda
        a = np.divide(dl, fit.k_adj * (1.0 - dl), out=np.zeros_like(dl), where=dl < 1.0)
        cum_a = np.cumsum(a)
        mu_levels = np.cumsum(mu.jumps)

        def a_before(x):
            return _step_at(fit.times, cum_a, x, side="left")

        # R(x) = sum_{u <= x} dmu(u) A(u-)
        r_levels = np.cumsum(mu.jumps * a_before(mu.times))

        s = grid[None, :]
        ci = c[:, None]
        mu_s = mu_g[None, :]
        mu_c = _step_at(mu.times, mu_levels, ci)
        before = ci < s
        gain = mu_s - mu_c
        # own observed censoring: dN_{i,1} / K°(C~_i), carried by mu after C~_i
        own = np.where(before & (d[:, None] == 1), gain / np.where(d == 1, k_adj(c), 1.0)[:, None], 0.0)
        # compensator part: -sum_{u<=s} dmu(u) A(min(u, C~_i)-)
        comp = _step_at(mu.times, r_levels, np.minimum(ci, s)) + np.where(before, a_before(ci) * gain, 0.0)
        infl = term1 + own - comp
    return _curve("censored", horizon, sample.n, mu, k_step, lam, grid, infl, mu_g)


def estimate(sample: Sample, horizon: float, grid=None, *, influence: bool = True) -> EstimateCurve:
    """Dispatch on the sample's design."""
    if sample.design == "uncensored":
        return mean_uncensored(sample, horizon, grid, influence=influence)
    if sample.design == "observed":
        return mu_ipcw_observed(sample, horizon, grid, influence=influence)
    return mu_ipcw_censored(sample, horizon, grid, influence=influence)


def estimate_kind(sample: Sample, kind: EstimatorKind, horizon: float, grid=None, *, influence: bool = True):
    if kind == "uncensored":
        return mean_uncensored(sample, horizon, grid, influence=influence)
    if kind == "ipcw_observed":
        return mu_ipcw_observed(sample, horizon, grid, influence=influence)
    if kind == "ipcw_censored":
        return mu_ipcw_censored(sample, horizon, grid, influence=influence)
    raise ValueError(f"unknown estimator kind {kind!r}")


def mu_functional(sample: Sample, weights, horizon: float, s, kind: EstimatorKind | None = None):
    """The estimating functional at a weighted empirical measure.

    ``weights`` (one per subject) replace the uniform ``1/n``; evaluating at
    ``(1 - eps)/n + eps * e_i`` and differencing in ``eps`` recovers the
    influence of subject ``i`` without using any derivative formula.
    """
    kind = kind or KIND_FOR_DESIGN[sample.design]
    horizon = _check_horizon(horizon)
    w, total = _weights(sample, weights)
    u, dnu, mass = _nu_jumps(sample, horizon, w, total)
    if kind == "uncensored":
        mu = _ipcw_mu(u, mass, total, np.ones_like(u), "K")
    elif kind == "ipcw_observed":
        _require(sample, "observed")
        k_hat, _ = _k_observed(sample.followup, w, total)
        mu = _ipcw_mu(u, mass, total, k_hat(u), "K_hat")
    elif kind == "ipcw_censored":
        _require(sample, "censored")
        fit, _ = _fit_censoring(sample, horizon, w, total)
        mu = _ipcw_mu(u, mass, total, product_integral(fit.lambda_step(), u), "K_hat")
    else:
        raise ValueError(f"unknown estimator kind {kind!r}")
    return mu(s)


# -- truth side -----------------------------------------------------------------


def _comp_integral(latent: LatentSample, truth: TruthSpec, s: float, upto: np.ndarray, k: float):
    """``int_0^a (N(s) - N(u)) k e^{k u} du`` per subject, ``a = upto[i]``."""
    grow = np.expm1(k * upto)
    n_s = latent.counts_at(s)
    inside = latent.event_time < upto[latent.event_owner]
    t = latent.event_time[inside]
    owner = latent.event_owner[inside]
    # int_0^a N(u) k e^{ku} du = sum_{t_e < a} (e^{ka} - e^{k t_e})
    n_part = np.bincount(owner, weights=np.exp(k * upto[owner]) - np.exp(k * t), minlength=latent.n)
    return n_s * grow - n_part


def influence_at_truth(
    latent: LatentSample,
    truth: TruthSpec,
    s: float,
    design: str,
    *,
    form: Literal["latent", "observed"] = "latent",
) -> np.ndarray:
    """Influence function at the true ``mu``, ``K``, ``Lambda`` and ``P(T > .)``.

    ``form="latent"`` uses the full ``(N, T, C)`` and the martingale
    ``M_C(du) = dN_C(u) - 1{C >= u} Lambda(du)``; ``form="observed"`` uses only
    the observed data. The two agree by the Duhamel identity, which the tests
    exploit. Returns one value per latent subject.
    """
    if not 0 <= s <= truth.horizon:
        raise ValueError("s must lie in [0, tau]")
    if not isinstance(latent, LatentSample):
        raise InputFormatError("latent data missing: influence at the truth needs the full (N, T, C)")
    truth._require_plain()
    cr, rho = truth.censor_rate, truth.terminal_rate
    C, T = latent.c, latent.t
    mu_s = truth.mean(s)

    if design == "uncensored":
        return latent.counts_at(s) - mu_s
    if design not in ("observed", "censored"):
        raise ValueError(f"unknown design {design!r}")

    if form == "observed":
        return _influence_observed_form(latent, truth, s, design)

    n_s = latent.counts_at(s)
    if cr == 0.0:
        return n_s - mu_s
    jump = C < s
    cj = np.where(jump, C, 0.0)
    n_c = latent.counts_at_each(cj)
    mu_c = truth.mean(cj)
    upto = np.minimum(C, s)
    if design == "observed":
        integrand_c = n_s - mu_s - n_c + mu_c
        comp = _comp_integral(latent, truth, s, upto, cr) - (
            mu_s * np.expm1(cr * upto) - cr * truth.int_mean_exp(upto, cr)
        )
    else:
        alive = T > cj
        integrand_c = n_s - n_c - np.where(alive, np.exp(rho * cj), 0.0) * (mu_s - mu_c)
        a2 = np.minimum(upto, T)
        comp = _comp_integral(latent, truth, s, upto, cr) - cr * (
            mu_s * _int_exp(a2, cr + rho) - truth.int_mean_exp(a2, cr + rho)
        )
    at_jump = np.where(jump, integrand_c / truth.censor_survivor(cj), 0.0)
    return n_s - mu_s - at_jump + comp


def _influence_observed_form(latent: LatentSample, truth: TruthSpec, s: float, design: str):
    cr, rho, lam = truth.censor_rate, truth.terminal_rate, truth.event_rate
    C, T = latent.c, latent.t
    mu_s = truth.mean(s)
    seen = (latent.event_time <= s) & (latent.event_time <= C[latent.event_owner])
    t = latent.event_time[seen]
    weighted = np.bincount(latent.event_owner[seen], weights=np.exp(cr * t), minlength=latent.n)
    if design == "observed":
        # int dn~/K - int 1{C >= u}/K dmu
        return weighted - lam * _int_exp(np.minimum(C, s), cr - rho)
    # int dn~/K - mu(s) + int_0^s Q(u-) mu(du)
    c_t = np.minimum(C, T)
    d_t = C < T
    k = cr + rho
    b = np.minimum(c_t, s)
    before = c_t < s
    gain = np.where(before, mu_s - truth.mean(b), 0.0)
    # own observed censoring: e^{k C~} (mu(s) - mu(C~)) when D~ = 1
    own = np.where(d_t & before, np.exp(k * b), 0.0) * gain
    # compensator: int_0^s mu'(u) int_0^{min(u, C~)} c e^{kv} dv du
    comp = lam * cr / k * (_int_exp(b, cr) - _int_exp(b, -rho)) if k > 0 else np.zeros(latent.n)
    comp = comp + cr * _int_exp(b, k) * gain
    return weighted - mu_s + own - comp


def asymptotic_variance_oracle(truth: TruthSpec, s: float, design: str, *, parts: bool = False):
    """Closed-form ``Var(influence(X; s))`` by adaptive quadrature.

    observed: ``Var N(s) + int_0^s Var(N(s) - N(u)) Lambda(du) / K(u+)``;
    censored: the same minus
    ``int_0^s (mu(s) - mu(u))^2 P(T <= u) / P(T > u) Lambda(du) / K(u+)``.
    With ``parts=True`` returns ``(base, added, subtracted)``.
    """
    if truth.has_covariate or truth.cap is not None:
        raise ValueError("variance oracle needs a homogeneous, uncapped Poisson truth")
    if not 0 <= s <= truth.horizon:
        raise ValueError("s must lie in [0, tau]")
    cr, rho = truth.censor_rate, truth.terminal_rate
    base = float(truth.var_N(s))
    if design == "uncensored" or cr == 0.0 or s == 0.0:
        return (base, 0.0, 0.0) if parts else base
    if design not in ("observed", "censored"):
        raise ValueError(f"unknown design {design!r}")
    quad = dict(epsabs=1e-12, epsrel=1e-10, limit=200)

    def added_f(u):
        return float(truth.var_increment(u, s)) * cr * math.exp(cr * u)

    added, _ = integrate.quad(added_f, 0.0, s, **quad)
    sub = 0.0
    if design == "censored" and rho > 0.0:
        mu_s = truth.mean(s)

        def sub_f(u):
            return (mu_s - truth.mean(u)) ** 2 * math.expm1(rho * u) * cr * math.exp(cr * u)

        sub, _ = integrate.quad(sub_f, 0.0, s, **quad)
    if parts:
        return base, added, sub
    if design == "observed":
        return base + added

    def total_f(u):
        return added_f(u) - (truth.mean(s) - truth.mean(u)) ** 2 * math.expm1(rho * u) * cr * math.exp(cr * u)

    combined, _ = integrate.quad(total_f, 0.0, s, **quad)
    return base + combined
