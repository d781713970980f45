"""Analytic truths for the shipped simulation family.

Events follow a homogeneous Poisson process with rate ``event_rate`` on
``(0, min(tau, T)]`` where the terminal time ``T ~ Exp(terminal_rate)``
(``T = inf`` when the rate is 0). Censoring is ``C ~ Exp(censor_rate)``,
independent of everything else. Optionally a binary covariate multiplies the
event rate, and ``cap`` stops each path after that many events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


def _int_exp(a, k):
    """``int_0^a exp(k u) du``, elementwise in ``a``."""
    a = np.asarray(a, dtype=float)
    if k == 0.0:
        return a
    return np.expm1(k * a) / k


def _int_u_exp(a, k):
    """``int_0^a u exp(k u) du``."""
    a = np.asarray(a, dtype=float)
    if k == 0.0:
        return a * a / 2.0
    return (a * np.exp(k * a) - np.expm1(k * a) / k) / k


@dataclass(frozen=True)
class TruthSpec:
    event_rate: float
    censor_rate: float = 0.0
    terminal_rate: float = 0.0
    horizon: float = 5.0
    z_prob: float | None = None
    z_multiplier: float = 1.0
    cap: int | None = None

    def __post_init__(self):
        if not self.event_rate >= 0:
            raise ValueError("event_rate must be >= 0")
        if not self.censor_rate >= 0 or not self.terminal_rate >= 0:
            raise ValueError("rates must be >= 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if self.z_prob is not None and not 0.0 <= self.z_prob <= 1.0:
            raise ValueError("z_prob must lie in [0, 1]")
        if not self.z_multiplier > 0:
            raise ValueError("z_multiplier must be > 0")
        if self.cap is not None and self.cap < 1:
            raise ValueError("cap must be a positive integer")

    @property
    def has_covariate(self) -> bool:
        return self.z_prob is not None

    @property
    def is_bounded(self) -> bool:
        return self.cap is not None or self.event_rate == 0.0

    def rate_for(self, z) -> np.ndarray | float:
        z = np.asarray(z, dtype=float)
        out = self.event_rate * np.where(z == 1.0, self.z_multiplier, 1.0)
        return float(out) if out.ndim == 0 else out

    # -- terminal time ------------------------------------------------------

    def surv_T(self, u):
        """P(T > u)."""
        return np.exp(-self.terminal_rate * np.asarray(u, dtype=float))

    def expected_min_T(self, a):
        """E(min(a, T))."""
        a = np.asarray(a, dtype=float)
        rho = self.terminal_rate
        if rho == 0.0:
            return a
        return -np.expm1(-rho * a) / rho

    def second_moment_min_T(self, a):
        """E(min(a, T)^2)."""
        a = np.asarray(a, dtype=float)
        rho = self.terminal_rate
        if rho == 0.0:
            return a * a
        return 2.0 * _int_u_exp(a, -rho)

    # -- censoring ----------------------------------------------------------

    def censor_survivor(self, u):
        """K(u) = P(C >= u); continuous here so K(u+) = K(u)."""
        return np.exp(-self.censor_rate * np.asarray(u, dtype=float))

    def adjusted_at_risk(self, u):
        """K°(u) = P(C~ > u) + P(C~ = u, D~ = 1) = K(u) P(T > u)."""
        return self.censor_survivor(u) * self.surv_T(u)

    # -- mean function ------------------------------------------------------

    def _clip(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("time must be >= 0")
        return np.minimum(s, self.horizon)

    def mean_given_z(self, s, z: float = 0.0):
        """E(N(s) | Z = z)."""
        s = self._clip(s)
        rate = self.rate_for(z)
        if self.cap is None:
            out = rate * self.expected_min_T(s)
        else:
            out = self._capped_mean(s, rate)
        return float(out) if np.ndim(out) == 0 else out

    def mean(self, s):
        """mu(s) = E(N(s)), marginal over the covariate."""
        if not self.has_covariate:
            return self.mean_given_z(s, 0.0)
        q = self.z_prob
        return (1 - q) * self.mean_given_z(s, 0.0) + q * self.mean_given_z(s, 1.0)

    __call__ = mean

    def mean_density(self, u):
        """d mu / du for the homogeneous, uncapped family."""
        self._require_plain()
        u = np.asarray(u, dtype=float)
        return np.where(u <= self.horizon, self.event_rate * self.surv_T(u), 0.0)

    def _capped_mean(self, s, rate):
        if self.terminal_rate != 0.0:
            raise ValueError("capped truths support terminal_rate = 0 only")
        lam = rate * np.asarray(s, dtype=float)
        k = np.arange(self.cap)
        # E min(N, cap) = cap - sum_{k<cap} (cap - k) P(N = k)
        pk = stats.poisson.pmf(k[:, None], np.atleast_1d(lam)[None, :])
        out = self.cap - ((self.cap - k)[:, None] * pk).sum(axis=0)
        return out.reshape(np.shape(lam))

    def _require_plain(self):
        if self.has_covariate or self.cap is not None:
            raise ValueError("closed forms need a homogeneous, uncapped Poisson truth")

    def int_mean_exp(self, a, k):
        """``int_0^a mu(u) exp(k u) du`` for ``a <= horizon``."""
        self._require_plain()
        lam, rho = self.event_rate, self.terminal_rate
        if rho == 0.0:
            return lam * _int_u_exp(a, k)
        return lam / rho * (_int_exp(a, k) - _int_exp(a, k - rho))

    # -- second moments -----------------------------------------------------

    def var_N(self, s):
        """Var(N(s)); given T, N(s) ~ Poisson(rate * min(s, T))."""
        self._require_plain()
        s = self._clip(s)
        lam = self.event_rate
        m1 = self.expected_min_T(s)
        return lam * m1 + lam**2 * (self.second_moment_min_T(s) - m1**2)

    def var_increment(self, u, s):
        """Var(N(s) - N(u)) for ``u <= s``.

        The increment is Poisson with rate times the length ``D`` of
        ``(u, s] ∩ (0, T]``; given ``T > u``, ``T - u`` is again exponential.
        """
        self._require_plain()
        s = self._clip(s)
        u = np.minimum(np.asarray(u, dtype=float), s)
        lam = self.event_rate
        alive = self.surv_T(u)
        m1 = alive * self.expected_min_T(s - u)
        m2 = alive * self.second_moment_min_T(s - u)
        return lam * m1 + lam**2 * (m2 - m1**2)


def true_mean(truth: TruthSpec, s):
    return truth.mean(s)


def describe_truth(truth: TruthSpec) -> str:
    parts = [f"lambda={truth.event_rate:g}", f"censor_rate={truth.censor_rate:g}"]
    if truth.terminal_rate:
        parts.append(f"terminal_rate={truth.terminal_rate:g}")
    if truth.cap is not None:
        parts.append(f"cap={truth.cap}")
    if truth.has_covariate:
        parts.append(f"z_prob={truth.z_prob:g}, z_multiplier={truth.z_multiplier:g}")
    return ", ".join(parts) + f", tau={truth.horizon:g}"

