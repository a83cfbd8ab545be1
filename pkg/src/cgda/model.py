"""Feature-space action representation and generalization of demonstrations.

An action is an ``m x n`` matrix: ``m`` scalar features sliced into ``n``
intermediate goals. Demonstrations are binned onto the goal grid in
proportion to their own duration and averaged cell by cell.
"""

from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyIntervalError, InvalidArgument, ParseError, SchemaError

ACTION_SCHEMA = "cgda.action/1"


@dataclass(frozen=True)
class Demonstration:
    id: str
    feature_names: tuple[str, ...]
    t: np.ndarray
    values: np.ndarray  # shape (samples, m)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if len(t) < 2:
            raise InvalidArgument(f"demonstration {self.id!r} needs at least 2 samples")
        if v.shape != (len(t), len(self.feature_names)):
            raise InvalidArgument(
                f"demonstration {self.id!r}: values shape {v.shape} does not match "
                f"{len(t)} samples x {len(self.feature_names)} features"
            )
        if t[0] != 0.0:
            raise InvalidArgument(f"demonstration {self.id!r} must start at t=0")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgument(f"demonstration {self.id!r}: timestamps not strictly increasing")

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def duration(self) -> float:
        return float(self.t[-1])


@dataclass
class FeatureTrajectory:
    """The generalized action: column ``j`` of ``values`` is goal ``X_j``."""

    feature_names: list[str]
    feature_units: list[str]
    t_min: float
    d_time: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        m, n = self.values.shape
        if m < 1 or n < 1:
            raise InvalidArgument("feature trajectory must be at least 1x1")
        if len(self.feature_names) != m or len(self.feature_units) != m:
            raise InvalidArgument("feature_names/feature_units length must equal m")
        if n != compute_goal_count(self.d_time, self.t_min):
            raise InvalidArgument(
                f"n={n} inconsistent with floor(d_time/t_min)={compute_goal_count(self.d_time, self.t_min)}"
            )

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def goal(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def to_dict(self) -> dict:
        return {
            "schema": ACTION_SCHEMA,
            "feature_names": list(self.feature_names),
            "feature_units": list(self.feature_units),
            "t_min": self.t_min,
            "d_time": self.d_time,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureTrajectory":
        schema = data.get("schema", ACTION_SCHEMA)
        if schema != ACTION_SCHEMA:
            raise SchemaError(f"action schema {schema!r}, expected {ACTION_SCHEMA!r}")
        return cls(
            feature_names=list(data["feature_names"]),
            feature_units=list(data["feature_units"]),
            t_min=float(data["t_min"]),
            d_time=float(data["d_time"]),
            values=np.asarray(data["values"], dtype=float),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FeatureTrajectory":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), path, exc.lineno) from exc
        return cls.from_dict(data)

    def __eq__(self, other):
        if not isinstance(other, FeatureTrajectory):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.feature_units == other.feature_units
            and self.t_min == other.t_min
            and self.d_time == other.d_time
            and np.array_equal(self.values, other.values)
        )


@dataclass
class ObservedTrajectory:
    t: float  # sampling interval
    values: np.ndarray  # shape (m, n')
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] < 1:
            raise InvalidArgument("observed trajectory needs at least one column")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


def compute_goal_count(d_time: float, t_min: float) -> int:
    """Number of intermediate goals, ``floor(d_time / t_min)``."""
    if not (t_min > 0 and d_time > 0):
        raise InvalidArgument(f"durations must be positive (d_time={d_time}, t_min={t_min})")
    if d_time < t_min:
        raise InvalidArgument(f"d_time={d_time} shorter than t_min={t_min}")
    return int(math.floor(d_time / t_min))


def bin_indices(t: np.ndarray, duration: float, n: int) -> np.ndarray:
    """Map timestamps to ``floor(n * t / duration)``, clamped to ``n - 1``.

    The floor is exact: samples whose ratio lands within rounding distance of
    an interval edge are re-binned with rational arithmetic.
    """
    t = np.asarray(t, dtype=float)
    ratio = n * t / duration
    idx = np.floor(ratio).astype(int)
    near = np.flatnonzero(np.abs(ratio - np.rint(ratio)) < 1e-9 * np.maximum(1.0, np.abs(ratio)))
    for k in near:
        idx[k] = math.floor(Fraction(float(t[k])) * n / Fraction(float(duration)))
    return np.clip(idx, 0, n - 1)


def _interval_means(chunks: Sequence[tuple[np.ndarray, np.ndarray]], m: int, n: int) -> np.ndarray:
    sums = np.zeros((m, n))
    counts = np.zeros(n, dtype=int)
    for idx, values in chunks:
        np.add.at(counts, idx, 1)
        for i in range(m):
            np.add.at(sums[i], idx, values[:, i])
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyIntervalError(int(empty[0]), n)
    return sums / counts


def generalize(
    demos: Sequence[Demonstration],
    t_min: float,
    feature_units: Sequence[str] | None = None,
) -> FeatureTrajectory:
    if not demos:
        raise InvalidArgument("generalize needs at least one demonstration")
    names = demos[0].feature_names
    for d in demos[1:]:
        if d.feature_names != names:
            raise InvalidArgument(
                f"demonstration {d.id!r} features {d.feature_names} differ from {names}"
            )
    m = len(names)
    d_time = float(np.mean([d.duration for d in demos]))
    n = compute_goal_count(d_time, t_min)
    chunks = [(bin_indices(d.t, d.duration, n), d.values) for d in demos]
    values = _interval_means(chunks, m, n)
    units = list(feature_units) if feature_units is not None else ["unitless"] * m
    return FeatureTrajectory(list(names), units, float(t_min), d_time, values)


def resample_observation(t, values, interval: float) -> ObservedTrajectory:
    """Interval-mean resampling of a timestamped feature stream.

    ``values`` has one row per sample. Timestamps are taken relative to the
    first sample.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if interval <= 0:
        raise InvalidArgument("sampling interval must be positive")
    if len(t) != len(v) or len(t) == 0:
        raise InvalidArgument("timestamps and values must be nonempty and aligned")
    rel = t - t[0]
    o_time = float(rel[-1])
    n_obs = compute_goal_count(o_time, interval) if o_time > 0 else 0
    if n_obs < 1:
        raise InvalidArgument(f"observation of {o_time} s shorter than interval {interval} s")
    means = _interval_means([(bin_indices(rel, o_time, n_obs), v)], v.shape[1], n_obs)
    return ObservedTrajectory(float(interval), means)


def read_demonstration(path) -> Demonstration:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", path)
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "t":
        raise ParseError("header must be 't,<feature>,...'", path, 1)
    t, vals = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}", path, lineno)
        try:
            nums = [float(x) for x in row]
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from exc
        if t and nums[0] <= t[-1]:
            raise ParseError("timestamps must be strictly increasing", path, lineno)
        t.append(nums[0])
        vals.append(nums[1:])
    if len(t) < 2:
        raise ParseError("need at least 2 samples", path)
    if t[0] != 0.0:
        raise ParseError("first timestamp must be 0", path, 2)
    return Demonstration(path.stem, tuple(header[1:]), np.array(t), np.array(vals))


def write_demonstration(demo: Demonstration, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *demo.feature_names])
        for ti, row in zip(demo.t, demo.values):
            w.writerow([repr(float(ti)), *(repr(float(x)) for x in row)])


def load_demonstrations(path) -> list[Demonstration]:
    """Read every ``*.csv`` under ``path`` in name order."""
    files = sorted(Path(path).glob("*.csv"))
    if not files:
        raise ParseError("no demonstration CSV files found", path)
    demos = [read_demonstration(f) for f in files]
    m = demos[0].m
    for f, d in zip(files, demos):
        if d.m != m:
            raise ParseError(f"{d.m} features, expected {m} (from {files[0].name})", f, 1)
    return demos
