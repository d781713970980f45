"""Counting-process paths, observed-data records and sample I/O.

A :class:`Sample` is array-backed (one flat array of event times with an
owner index) because the estimators and simulations work on whole samples at
once; :class:`Subject` objects are materialised on demand.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence, Union

import numpy as np

from .errors import InputFormatError
from .stepfn import StepFunction

Design = Literal["uncensored", "observed", "censored"]
DESIGNS = ("uncensored", "observed", "censored")


@dataclass(frozen=True)
class CountingPath:
    """Sorted event times; a time repeated k times is a jump of size k."""

    event_times: tuple = ()

    def __post_init__(self):
        times = tuple(float(t) for t in self.event_times)
        if any(not t > 0 for t in times):
            raise ValueError("event times must be > 0")
        object.__setattr__(self, "event_times", tuple(sorted(times)))

    @property
    def total(self) -> int:
        """N(inf)."""
        return len(self.event_times)

    def __call__(self, s):
        return np.searchsorted(np.asarray(self.event_times), s, side="right")

    def as_step(self) -> StepFunction:
        return StepFunction(self.event_times, np.ones(self.total))

    def order_statistic(self, k: int) -> float:
        """T_k, the time of the k-th event (1-based)."""
        return self.event_times[k - 1]


def decompose(path: CountingPath) -> list[CountingPath]:
    """Split ``path`` into simple paths, the k-th jumping once at T_k."""
    return [CountingPath((t,)) for t in path.event_times]


def empirical_mean(paths: Sequence[CountingPath]) -> StepFunction:
    """``F_n = n^{-1} sum_i N_i`` as a step function."""
    if len(paths) == 0:
        raise ValueError("empirical mean of an empty collection")
    times = [t for path in paths for t in path.event_times]
    return mean_of_events(np.asarray(times, dtype=float), len(paths))


def mean_of_events(times: np.ndarray, n: int, weights: np.ndarray | None = None) -> StepFunction:
    """Average of ``n`` counting processes given their pooled event times."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return StepFunction.constant(0.0)
    uniq, counts = np.unique(times, return_counts=True)
    if weights is None:
        return StepFunction(uniq, counts / n)
    return StepFunction(times, weights)


def censor_path(full: CountingPath, c: float) -> CountingPath:
    """Keep the events at times ``u <= c``."""
    if not c > 0:
        raise ValueError("censoring time must be > 0")
    return CountingPath(tuple(t for t in full.event_times if t <= c))


@dataclass(frozen=True)
class ObservedCensoring:
    c: float


@dataclass(frozen=True)
class CensoredCensoring:
    c_tilde: float
    d_tilde: int


@dataclass(frozen=True)
class Subject:
    path: CountingPath
    design: Union[ObservedCensoring, CensoredCensoring, None] = None
    z: float | None = None
    id: str | None = None

    @property
    def followup(self) -> float:
        if isinstance(self.design, ObservedCensoring):
            return self.design.c
        if isinstance(self.design, CensoredCensoring):
            return self.design.c_tilde
        return math.inf


class Sample:
    """A design-homogeneous collection of observed subjects.

    Attributes
    ----------
    design : "uncensored", "observed" or "censored"
    followup : (n,) censoring time C (observed), C~ (censored) or inf
    status : (n,) D~ for the censored design, else all ones
    event_owner, event_time : pooled events, sorted by (owner, time)
    z : (n,) covariate or None
    ids : subject labels
    """

    def __init__(
        self,
        design: Design,
        followup,
        event_owner,
        event_time,
        status=None,
        z=None,
        ids: Sequence[str] | None = None,
        validate: bool = True,
    ):
        if design not in DESIGNS:
            raise InputFormatError(f"unknown design {design!r}")
        followup = np.asarray(followup, dtype=float)
        n = followup.size
        if n == 0:
            raise InputFormatError("a sample needs at least one subject")
        event_owner = np.asarray(event_owner, dtype=np.int64)
        event_time = np.asarray(event_time, dtype=float)
        status = np.ones(n, dtype=np.int64) if status is None else np.asarray(status, dtype=np.int64)
        if validate:
            if design == "uncensored" and not np.all(np.isinf(followup)):
                raise InputFormatError("uncensored subjects have no follow-up time")
            if not np.all(followup > 0):
                raise InputFormatError("follow-up times must be > 0")
            if status.shape != (n,) or not np.all((status == 0) | (status == 1)):
                raise InputFormatError("status must be 0/1 per subject")
            if design != "censored" and not np.all(status == 1):
                raise InputFormatError("status 0 (terminal) only exists in the censored design")
            if event_owner.shape != event_time.shape:
                raise InputFormatError("event owner/time length mismatch")
            if event_time.size:
                if event_owner.min() < 0 or event_owner.max() >= n:
                    raise InputFormatError("event for an unknown subject")
                if not np.all(event_time > 0):
                    raise InputFormatError("event times must be > 0")
                late = event_time > followup[event_owner]
                if late.any():
                    i = int(event_owner[np.argmax(late)])
                    label = ids[i] if ids is not None else i + 1
                    raise InputFormatError(f"subject {label} has an event after follow-up")
            order = np.lexsort((event_time, event_owner))
            event_owner, event_time = event_owner[order], event_time[order]
        self.design = design
        self.followup = followup
        self.status = status
        self.event_owner = event_owner
        self.event_time = event_time
        self.z = None if z is None else np.asarray(z, dtype=float)
        self.ids = tuple(str(i + 1) for i in range(n)) if ids is None else tuple(ids)
        if len(self.ids) != n:
            raise InputFormatError("one id per subject required")

    @classmethod
    def from_subjects(cls, subjects: Sequence[Subject]) -> Sample:
        if len(subjects) == 0:
            raise InputFormatError("a sample needs at least one subject")
        kinds = {type(s.design) for s in subjects}
        if len(kinds) != 1:
            raise InputFormatError("subjects mix censoring designs")
        kind = kinds.pop()
        design = {ObservedCensoring: "observed", CensoredCensoring: "censored", type(None): "uncensored"}[kind]
        owner = [i for i, s in enumerate(subjects) for _ in s.path.event_times]
        times = [t for s in subjects for t in s.path.event_times]
        status = [s.design.d_tilde if design == "censored" else 1 for s in subjects]
        zs = [s.z for s in subjects]
        z = None if all(v is None for v in zs) else [math.nan if v is None else v for v in zs]
        ids = [s.id if s.id is not None else str(i + 1) for i, s in enumerate(subjects)]
        return cls(design, [s.followup for s in subjects], owner, times, status, z, ids)

    @classmethod
    def from_paths(cls, paths: Sequence[CountingPath]) -> Sample:
        return cls.from_subjects([Subject(p) for p in paths])

    @property
    def n(self) -> int:
        return int(self.followup.size)

    def __len__(self) -> int:
        return self.n

    def counts_at(self, s: float) -> np.ndarray:
        """Per-subject ``N_i(s)``."""
        hit = self.event_time <= s
        return np.bincount(self.event_owner[hit], minlength=self.n).astype(float)

    def path(self, i: int) -> CountingPath:
        return CountingPath(tuple(self.event_time[self.event_owner == i]))

    @property
    def paths(self) -> list[CountingPath]:
        return [self.path(i) for i in range(self.n)]

    def subject(self, i: int) -> Subject:
        if self.design == "observed":
            design = ObservedCensoring(float(self.followup[i]))
        elif self.design == "censored":
            design = CensoredCensoring(float(self.followup[i]), int(self.status[i]))
        else:
            design = None
        z = None if self.z is None or math.isnan(self.z[i]) else float(self.z[i])
        return Subject(self.path(i), design, z, self.ids[i])

    @property
    def subjects(self) -> list[Subject]:
        return [self.subject(i) for i in range(self.n)]

    def drop(self, i: int) -> Sample:
        """The sample with subject ``i`` left out."""
        if self.n == 1:
            raise InputFormatError("cannot leave out the only subject")
        keep = self.event_owner != i
        owner = self.event_owner[keep]
        owner = owner - (owner > i)
        sel = np.arange(self.n) != i
        return Sample(
            self.design,
            self.followup[sel],
            owner,
            self.event_time[keep],
            self.status[sel],
            None if self.z is None else self.z[sel],
            [x for k, x in enumerate(self.ids) if k != i],
            validate=False,
        )

    def subset(self, index: np.ndarray) -> Sample:
        """Subjects ``index`` (in that order), e.g. a prefix of a trajectory."""
        index = np.asarray(index, dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[index] = np.arange(index.size)
        new_owner = remap[self.event_owner]
        keep = new_owner >= 0
        return Sample(
            self.design,
            self.followup[index],
            new_owner[keep],
            self.event_time[keep],
            self.status[index],
            None if self.z is None else self.z[index],
            [self.ids[k] for k in index],
        )

    def with_design(self, design: Design, status=None) -> Sample:
        return Sample(
            design,
            self.followup,
            self.event_owner,
            self.event_time,
            self.status if status is None else status,
            self.z,
            self.ids,
        )

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        same_z = (self.z is None and other.z is None) or (
            self.z is not None and other.z is not None and np.array_equal(self.z, other.z, equal_nan=True)
        )
        return (
            self.design == other.design
            and self.ids == other.ids
            and np.array_equal(self.followup, other.followup)
            and np.array_equal(self.status, other.status)
            and np.array_equal(self.event_owner, other.event_owner)
            and np.array_equal(self.event_time, other.event_time)
            and same_z
        )

    __hash__ = None

    def __repr__(self):
        return f"Sample(design={self.design!r}, n={self.n}, events={self.event_time.size})"


# -- files -------------------------------------------------------------------

SUBJECTS_HEADER = ["id", "followup", "reason", "z"]
EVENTS_HEADER = ["id", "time"]


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def write_sample(sample: Sample, subjects_file, events_file) -> None:
    """Write the subjects/events CSV pair. Floats use ``repr`` so reads are exact."""
    with open(subjects_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUBJECTS_HEADER)
        for i in range(sample.n):
            reason = "terminal" if sample.status[i] == 0 else "censoring"
            z = "" if sample.z is None or math.isnan(sample.z[i]) else _fmt(sample.z[i])
            w.writerow([sample.ids[i], _fmt(sample.followup[i]), reason, z])
    with open(events_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENTS_HEADER)
        for owner, t in zip(sample.event_owner, sample.event_time):
            w.writerow([sample.ids[owner], _fmt(t)])


def _read_rows(path, header: list[str]) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows or [h.strip() for h in rows[0]] != header:
        raise InputFormatError(f"{path}: expected header {','.join(header)}")
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise InputFormatError(f"{path}:{k}: expected {len(header)} fields, got {len(r)}")
    return body


def _number(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputFormatError(f"{where}: not a number: {text!r}") from None


def read_sample(subjects_file, events_file, design: Design | None = None) -> Sample:
    """Read a subjects/events CSV pair.

    Without an explicit ``design`` the sample is ``censored`` (``reason`` gives
    D~). ``design="observed"`` requires every reason to be ``censoring``;
    ``design="uncensored"`` requires infinite follow-up.
    """
    srows = _read_rows(subjects_file, SUBJECTS_HEADER)
    if not srows:
        raise InputFormatError(f"{subjects_file}: no subjects")
    ids, followup, status, zs = [], [], [], []
    for k, (sid, fu, reason, z) in enumerate(srows, start=2):
        where = f"{subjects_file}:{k}"
        sid = sid.strip()
        ids.append(sid)
        c = _number(fu, where)
        if not c > 0:
            raise InputFormatError(f"{where}: follow-up must be > 0")
        followup.append(c)
        reason = reason.strip()
        if reason not in ("censoring", "terminal"):
            raise InputFormatError(f"{where}: unknown reason {reason!r}")
        status.append(1 if reason == "censoring" else 0)
        zs.append(math.nan if z.strip() == "" else _number(z, where))
    if len(set(ids)) != len(ids):
        raise InputFormatError(f"{subjects_file}: duplicate ids")
    if _id_key(ids) != sorted(_id_key(ids)):
        raise InputFormatError(f"{subjects_file}: ids must be sorted")

    index = {sid: i for i, sid in enumerate(ids)}
    owner, times = [], []
    for k, (sid, t) in enumerate(_read_rows(events_file, EVENTS_HEADER), start=2):
        where = f"{events_file}:{k}"
        sid = sid.strip()
        if sid not in index:
            raise InputFormatError(f"{where}: unknown subject id {sid}")
        owner.append(index[sid])
        times.append(_number(t, where))

    if design is None:
        design = "censored"
    if design == "observed" and min(status) == 0:
        raise InputFormatError("observed design cannot contain terminal rows (mixed designs)")
    if design == "uncensored" and (min(status) == 0 or not all(math.isinf(c) for c in followup)):
        raise InputFormatError("uncensored design needs infinite follow-up and no terminal rows")
    z = None if all(math.isnan(v) for v in zs) else zs
    return Sample(design, followup, owner, times, status, z, ids)


def _id_key(ids: Iterable[str]) -> list:
    # numeric ids sort numerically, anything else lexicographically
    ids = list(ids)
    try:
        return [(0, float(i), i) for i in ids]
    except ValueError:
        return [(1, 0.0, i) for i in ids]


class LatentSample:
    """Full simulated data: complete paths ``N_i``, terminal ``T_i``, censoring ``C_i``.

    Only simulations have this; it feeds the truth-side influence checks.
    """

    def __init__(self, event_owner, event_time, c, t, z=None):
        self.event_owner = np.asarray(event_owner, dtype=np.int64)
        self.event_time = np.asarray(event_time, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.z = None if z is None else np.asarray(z, dtype=float)

    @property
    def n(self) -> int:
        return int(self.c.size)

    def __len__(self) -> int:
        return self.n

    def counts_at(self, s: float) -> np.ndarray:
        """Per-subject ``N_i(s)``."""
        hit = self.event_time <= s
        return np.bincount(self.event_owner[hit], minlength=self.n).astype(float)

    def counts_at_each(self, s: np.ndarray) -> np.ndarray:
        """Per-subject ``N_i(s_i)``."""
        hit = self.event_time <= np.asarray(s, dtype=float)[self.event_owner]
        return np.bincount(self.event_owner[hit], minlength=self.n).astype(float)

    def path(self, i: int) -> CountingPath:
        return CountingPath(tuple(self.event_time[self.event_owner == i]))

    def observe(self, design: Design) -> Sample:
        """The observed sample under ``design``."""
        if design == "uncensored":
            return Sample(design, np.full(self.n, math.inf), self.event_owner, self.event_time, z=self.z, validate=False)
        seen = self.event_time <= self.c[self.event_owner]
        owner, times = self.event_owner[seen], self.event_time[seen]
        if design == "observed":
            return Sample(design, self.c, owner, times, z=self.z, validate=False)
        if design == "censored":
            c_tilde = np.minimum(self.c, self.t)
            status = (self.c < self.t).astype(np.int64)
            return Sample(design, c_tilde, owner, times, status, self.z, validate=False)
        raise ValueError(f"unknown design {design!r}")

    def prefix(self, n: int) -> LatentSample:
        keep = self.event_owner < n
        return LatentSample(
            self.event_owner[keep],
            self.event_time[keep],
            self.c[:n],
            self.t[:n],
            None if self.z is None else self.z[:n],
        )
