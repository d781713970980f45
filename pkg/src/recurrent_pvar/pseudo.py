"""Jackknife pseudo-observations and the conditional-unbiasedness diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputFormatError, RiskSetError
from .estimators import estimate_kind
from .process import Sample
from .truth import TruthSpec

KINDS = ("uncensored", "ipcw_observed", "ipcw_censored")


@dataclass(frozen=True, eq=False)
class PseudoSet:
    t: float
    estimator_kind: str
    values: np.ndarray
    full_estimate: float
    ids: tuple
    z: np.ndarray | None = None

    def __post_init__(self):
        if len(self.values) != len(self.ids):
            raise ValueError("one pseudo-value per subject required")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def mean_gap(self) -> float:
        """mean(values) - full_estimate; zero for the linear (uncensored) kind."""
        return float(np.mean(self.values) - self.full_estimate)


def _mu_at(sample: Sample, t: float, kind: str) -> float:
    return float(estimate_kind(sample, kind, t, [t], influence=False).mu_grid[0])


def pseudo_values(sample: Sample, t: float, estimator_kind: str) -> PseudoSet:
    """``n mu_hat(t) - (n - 1) mu_hat^{(i)}(t)`` by naive leave-one-out refits."""
    if estimator_kind not in KINDS:
        raise InputFormatError(f"unknown estimator kind {estimator_kind!r}")
    if not t > 0 or not math.isfinite(t):
        raise InputFormatError("t must be a positive finite time")
    n = sample.n
    if n < 2:
        raise InputFormatError("pseudo-values need at least two subjects")
    full = _mu_at(sample, t, estimator_kind)
    values = np.empty(n)
    for i in range(n):
        try:
            loo = _mu_at(sample.drop(i), t, estimator_kind)
        except RiskSetError as exc:
            raise RiskSetError(f"leaving out subject {sample.ids[i]}: {exc}") from None
        values[i] = n * full - (n - 1) * loo
    return PseudoSet(float(t), estimator_kind, values, full, sample.ids, sample.z)


@dataclass(frozen=True)
class GroupCheck:
    z: float
    count: int
    mean: float
    se: float
    truth: float

    @property
    def discrepancy(self) -> float:
        """(mean - truth) / se."""
        gap = self.mean - self.truth
        if self.se > 0:
            return gap / self.se
        return 0.0 if gap == 0 else math.copysign(math.inf, gap)


@dataclass(frozen=True)
class UnbiasednessReport:
    t: float
    estimator_kind: str
    groups: tuple
    mean_gap: float

    def summary(self) -> str:
        lines = [f"t={self.t:g}, kind={self.estimator_kind}, mean(pseudo) - mu_hat = {self.mean_gap:.9g}"]
        for g in self.groups:
            lines.append(
                f"z={g.z:g}: n={g.count}, mean {g.mean:.9g} (se {g.se:.3g}), "
                f"E(N(t)|Z) {g.truth:.9g}, studentized {g.discrepancy:+.3f}"
            )
        return "\n".join(lines)


def conditional_unbiasedness_check(
    sample: Sample, t: float, estimator_kind: str, truth: TruthSpec, pseudo: PseudoSet | None = None
) -> UnbiasednessReport:
    """Group means of pseudo-values against ``E(N(t) | Z = z)``, z in {0, 1}."""
    if sample.z is None:
        raise InputFormatError("the diagnostic needs a covariate z")
    z = sample.z
    if not np.all((z == 0) | (z == 1)):
        raise InputFormatError("the covariate must be binary 0/1")
    if pseudo is None:
        pseudo = pseudo_values(sample, t, estimator_kind)
    groups = []
    for level in (0.0, 1.0):
        v = pseudo.values[z == level]
        if v.size == 0:
            continue
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
        groups.append(GroupCheck(level, int(v.size), float(v.mean()), se, float(truth.mean_given_z(t, level))))
    return UnbiasednessReport(float(t), estimator_kind, tuple(groups), pseudo.mean_gap)
