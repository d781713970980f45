"""Right-continuous step functions on [0, inf) and their p-variation.

A :class:`StepFunction` is stored as an initial level plus a strictly
increasing array of breakpoints with the (nonzero) jump at each. Everything
here is immutable; arrays handed out are read-only views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from . import _dp

Side = Literal["right", "left"]

BRUTEFORCE_MAX_BREAKPOINTS = 20


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class StepFunction:
    """Piecewise-constant, right-continuous function on ``[0, domain_end]``.

    ``f(t) = initial_value + sum(jumps[times <= t])``. Jumps sharing a time
    are summed; jumps that sum to exactly zero are dropped.
    """

    __slots__ = ("initial_value", "times", "jumps", "domain_end", "_levels")

    def __init__(
        self,
        times: Sequence[float] | np.ndarray = (),
        jumps: Sequence[float] | np.ndarray = (),
        initial_value: float = 0.0,
        domain_end: float = math.inf,
    ):
        times = np.asarray(times, dtype=float).ravel()
        jumps = np.asarray(jumps, dtype=float).ravel()
        if times.shape != jumps.shape:
            raise ValueError("times and jumps must have the same length")
        if times.size and not np.all(np.isfinite(times)):
            raise ValueError("breakpoints must be finite")
        if np.any(times <= 0):
            raise ValueError("breakpoints must be strictly positive")
        if not np.all(np.isfinite(jumps)):
            raise ValueError("jumps must be finite")
        if not domain_end > 0:
            raise ValueError("domain_end must be positive")
        if times.size and times.max() > domain_end:
            raise ValueError("breakpoint beyond domain_end")

        if times.size > 1 and not np.all(np.diff(times) > 0):
            order = np.argsort(times, kind="stable")
            times, jumps = times[order], jumps[order]
            uniq, start = np.unique(times, return_index=True)
            jumps = np.add.reduceat(jumps, start)
            times = uniq
        nonzero = jumps != 0.0
        if not nonzero.all():
            times, jumps = times[nonzero], jumps[nonzero]

        self.initial_value = float(initial_value)
        self.times = _frozen(times.copy())
        self.jumps = _frozen(jumps.copy())
        self.domain_end = float(domain_end)
        self._levels = None

    @classmethod
    def from_levels(
        cls,
        times: Sequence[float] | np.ndarray,
        levels: Sequence[float] | np.ndarray,
        initial_value: float = 0.0,
        domain_end: float = math.inf,
    ) -> StepFunction:
        """Build from the level taken at and after each time in ``times``."""
        levels = np.asarray(levels, dtype=float)
        prev = np.concatenate(([initial_value], levels[:-1]))
        out = cls(times, levels - prev, initial_value, domain_end)
        if out.times.size == levels.size:
            # keep the given levels rather than re-summing rounded differences
            out._levels = _frozen(levels.copy())
        return out

    @classmethod
    def constant(cls, value: float = 0.0) -> StepFunction:
        return cls((), (), value)

    @property
    def levels(self) -> np.ndarray:
        """Value on ``[times[k], times[k+1])`` for each breakpoint ``k``."""
        if self._levels is None:
            self._levels = _frozen(self.initial_value + np.cumsum(self.jumps))
        return self._levels

    @property
    def value_sequence(self) -> np.ndarray:
        """``(f(0), f(t_1), ..., f(t_m))``: every level the function takes."""
        return np.concatenate(([self.initial_value], self.levels))

    @property
    def final_value(self) -> float:
        """The constant tail level, i.e. the value "at infinity"."""
        return float(self.levels[-1]) if self.times.size else self.initial_value

    def __len__(self) -> int:
        return int(self.times.size)

    def __call__(self, t):
        return evaluate(self, t, "right")

    def left_limit(self, t):
        return evaluate(self, t, "left")

    def total_variation(self) -> float:
        return float(np.abs(self.jumps).sum())

    def restrict(self, end: float) -> StepFunction:
        """Same function, with the domain cut at ``end``."""
        keep = self.times <= end
        return StepFunction(self.times[keep], self.jumps[keep], self.initial_value, end)

    def _combine(self, other: StepFunction, sign: float) -> StepFunction:
        return StepFunction(
            np.concatenate((self.times, other.times)),
            np.concatenate((self.jumps, sign * other.jumps)),
            self.initial_value + sign * other.initial_value,
            min(self.domain_end, other.domain_end),
        )

    def __add__(self, other):
        if isinstance(other, StepFunction):
            return self._combine(other, 1.0)
        return StepFunction(self.times, self.jumps, self.initial_value + other, self.domain_end)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, StepFunction):
            return self._combine(other, -1.0)
        return StepFunction(self.times, self.jumps, self.initial_value - other, self.domain_end)

    def __neg__(self):
        return StepFunction(self.times, -self.jumps, -self.initial_value, self.domain_end)

    def __mul__(self, c):
        c = float(c)
        if c == 0.0:
            return StepFunction.constant(0.0)
        return StepFunction(self.times, c * self.jumps, c * self.initial_value, self.domain_end)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            self.initial_value == other.initial_value
            and self.domain_end == other.domain_end
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.jumps, other.jumps)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"StepFunction(initial_value={self.initial_value!r}, "
            f"breakpoints={len(self)}, domain_end={self.domain_end!r})"
        )


def evaluate(f: StepFunction, t, side: Side = "right"):
    """Evaluate ``f(t)`` (``side="right"``) or the left limit ``f(t-)``.

    Accepts scalars or arrays. ``f(0-)`` is the initial value.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("step functions live on [0, inf)")
    how = "right" if side == "right" else "left"
    if side not in ("right", "left"):
        raise ValueError(f"unknown side {side!r}")
    idx = np.searchsorted(f.times, t_arr, side=how)
    table = f.value_sequence
    out = table[idx]
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class PVarResult:
    """p-variation of a function along with the partition attaining it.

    ``partition`` holds times; ``partition_values`` the function values used
    at those times (a left limit where the optimum sits just before a jump).
    """

    p: float
    v_p: float
    seminorm_p: float
    sup_norm: float
    norm_p: float
    partition: tuple
    partition_values: tuple

    def recompute(self) -> float:
        """Sum of ``|increment|**p`` along the stored partition."""
        return _partition_sum(np.asarray(self.partition_values), self.p)


def _partition_sum(values: np.ndarray, p: float) -> float:
    total = 0.0
    for a, b in zip(values[:-1], values[1:]):
        total += _dp.abs_pow(b - a, p)
    return total


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    return p


def _result(p, v_p, sup, times, values) -> PVarResult:
    semi = v_p ** (1.0 / p) if v_p > 0 else 0.0
    return PVarResult(
        p=p,
        v_p=float(v_p),
        seminorm_p=float(semi),
        sup_norm=float(sup),
        norm_p=float(semi + sup),
        partition=tuple(float(x) for x in times),
        partition_values=tuple(float(x) for x in values),
    )


def sequence_pvar(values: np.ndarray, p: float) -> tuple[float, np.ndarray]:
    """Exact p-variation of a finite sequence; returns ``(v_p, indices)``.

    Interior points of monotone runs are pruned first, then the DP runs on
    the remaining turning points.
    """
    values = np.ascontiguousarray(values, dtype=float)
    if values.size == 0:
        return 0.0, np.zeros(0, dtype=np.int64)
    keep = _dp.local_extrema(values)
    v_p, path = _dp.pvar_dp(values[keep], float(p))
    return float(v_p), keep[path]


def pvar(f: StepFunction, p: float) -> PVarResult:
    """p-variation over ``[0, domain_end]`` of a step function.

    A step function takes finitely many values, so the supremum over
    partitions is a maximum over subsequences of ``f.value_sequence``.
    """
    p = _check_p(p)
    values = f.value_sequence
    times = np.concatenate(([0.0], f.times))
    v_p, idx = sequence_pvar(values, p)
    return _result(p, v_p, np.abs(values).max(), times[idx], values[idx])


def _bit_table(size: int) -> np.ndarray:
    masks = np.arange(1 << size, dtype=np.int64)
    return ((masks[:, None] >> np.arange(size)) & 1).astype(bool)


def pvar_bruteforce(f: StepFunction, p: float) -> PVarResult:
    """Exhaustive maximum over all subsequences of the value sequence.

    Reference for :func:`pvar`; exponential in the number of breakpoints.
    """
    p = _check_p(p)
    if len(f) > BRUTEFORCE_MAX_BREAKPOINTS:
        raise ValueError(
            f"brute force limited to {BRUTEFORCE_MAX_BREAKPOINTS} breakpoints, got {len(f)}"
        )
    values = f.value_sequence
    times = np.concatenate(([0.0], f.times))
    bits = _bit_table(values.size)
    total = np.zeros(bits.shape[0])
    last = np.zeros(bits.shape[0])
    started = np.zeros(bits.shape[0], dtype=bool)
    for k, vk in enumerate(values):
        chosen = bits[:, k]
        d = np.abs(vk - last)
        with np.errstate(divide="ignore"):
            term = np.where(d > 0, np.exp(p * np.log(np.where(d > 0, d, 1.0))), 0.0)
        total = np.where(chosen & started, total + term, total)
        last = np.where(chosen, vk, last)
        started |= chosen
    best = int(np.argmax(total))
    sel = bits[best]
    if not sel.any():
        sel = np.zeros(values.size, dtype=bool)
        sel[0] = True
    return _result(p, total[best], np.abs(values).max(), times[sel], values[sel])


def pvar_distance_to_truth(
    F_n: StepFunction,
    F: Callable[[np.ndarray], np.ndarray],
    p: float,
    horizon: float,
) -> PVarResult:
    """p-variation quantities of ``F_n - F`` on ``[0, horizon]``.

    ``F`` must be continuous and nondecreasing, so ``F_n - F`` is monotone
    between jumps of ``F_n``; its extremes lie among
    ``g(0), g(t_1-), g(t_1), ..., g(horizon)`` and the exact computation is a
    DP over that sequence.
    """
    p = _check_p(p)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    inside = F_n.times <= horizon
    t = F_n.times[inside]
    right = F_n.levels[inside]
    left = np.concatenate(([F_n.initial_value], right[:-1]))
    pts = np.concatenate(([0.0], t, [horizon]))
    try:
        F_pts = np.asarray(F(pts), dtype=float)
    except Exception as exc:  # surface evaluation failures uniformly
        raise ValueError(f"truth could not be evaluated: {exc}") from exc
    if F_pts.shape != pts.shape or not np.all(np.isfinite(F_pts)):
        raise ValueError("truth must return finite values at every required point")
    F_t = F_pts[1:-1]
    seq = np.empty(2 * t.size + 2)
    seq_t = np.empty_like(seq)
    seq[0] = F_n.initial_value - F_pts[0]
    seq_t[0] = 0.0
    seq[1:-1:2] = left - F_t
    seq[2:-1:2] = right - F_t
    seq_t[1:-1:2] = t
    seq_t[2:-1:2] = t
    seq[-1] = F_n(horizon) - F_pts[-1] if math.isfinite(horizon) else F_n.final_value - F_pts[-1]
    seq_t[-1] = horizon
    v_p, idx = sequence_pvar(seq, p)
    return _result(p, v_p, np.abs(seq).max(), seq_t[idx], seq[idx])


def stieltjes_integral(
    g: Callable,
    f: StepFunction,
    s: float = math.inf,
    upper: Literal["closed", "open"] = "closed",
) -> float:
    """``sum g(u) * df(u)`` over breakpoints ``0 < u <= s`` (or ``u < s``)."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if upper == "closed":
        n = np.searchsorted(f.times, s, side="right")
    elif upper == "open":
        n = np.searchsorted(f.times, s, side="left")
    else:
        raise ValueError(f"unknown upper endpoint convention {upper!r}")
    if n == 0:
        return 0.0
    u = f.times[:n]
    gu = np.broadcast_to(np.asarray(g(u), dtype=float), u.shape)
    return float(np.dot(gu, f.jumps[:n]))


def product_integral(hazard: StepFunction, s) -> float | np.ndarray:
    """``prod_{u < s} (1 - dLambda(u))`` for a step cumulative hazard.

    Left-continuous in ``s``; equals 1 up to and including the first jump.
    """
    if np.any(hazard.jumps > 1.0):
        raise ValueError("cumulative hazard has a jump larger than 1")
    factors = np.concatenate(([1.0], np.cumprod(1.0 - hazard.jumps)))
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("s must be >= 0")
    out = factors[np.searchsorted(hazard.times, s_arr, side="left")]
    return float(out) if out.ndim == 0 else out
