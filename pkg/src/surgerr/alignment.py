"""Dynamic time warping and Nor-Nor / Err-Nor distance distributions.

The step pattern is the classic symmetric one (match, insertion and deletion
all weighted 1) with no window; both endpoints are matched. Distances are the
raw sum of local costs along the optimal path unless path-length
normalization is requested.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionMismatch, EmptySeries, InsufficientExamples
from .ingest import ParameterGroup, parameter_group
from .segmentation import InstanceSet, extract_group

MODES = ("independent", "dependent")


@dataclass(frozen=True)
class DtwConfig:
    mode: str = "independent"
    local_cost: str = "euclidean"
    normalize: str | None = None  # None or "path-length"
    zscore: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.local_cost != "euclidean":
            raise ValueError("only the euclidean local cost is supported")
        if self.normalize not in (None, "path-length"):
            raise ValueError("normalize must be None or 'path-length'")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "local_cost": self.local_cost,
            "step_pattern": "symmetric",
            "normalize": self.normalize,
            "zscore": self.zscore,
        }


@njit(cache=True)
def _dtw_points(a, b, normalize):
    """DTW between two sequences of d-dimensional points (rows)."""
    la, lb = a.shape[0], b.shape[0]
    d = a.shape[1]
    prev = np.empty(lb)
    cur = np.empty(lb)
    prev_len = np.empty(lb, dtype=np.int64)
    cur_len = np.empty(lb, dtype=np.int64)
    for i in range(la):
        for j in range(lb):
            if d == 1:
                c = abs(a[i, 0] - b[j, 0])
            else:
                s = 0.0
                for k in range(d):
                    diff = a[i, k] - b[j, k]
                    s += diff * diff
                c = np.sqrt(s)
            if i == 0 and j == 0:
                cur[j] = c
                cur_len[j] = 1
                continue
            # predecessor preference on ties: diagonal, then vertical, then horizontal
            best = np.inf
            blen = 0
            if i > 0 and j > 0:
                best = prev[j - 1]
                blen = prev_len[j - 1]
            if i > 0 and prev[j] < best:
                best = prev[j]
                blen = prev_len[j]
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
                blen = cur_len[j - 1]
            cur[j] = best + c
            cur_len[j] = blen + 1
        prev, cur = cur, prev
        prev_len, cur_len = cur_len, prev_len
    total = prev[lb - 1]
    if normalize:
        return total / prev_len[lb - 1]
    return total


@njit(cache=True)
def _dtw_kernel(a, b, dependent, normalize):
    if dependent:
        return _dtw_points(a, b, normalize)
    total = 0.0
    for k in range(a.shape[1]):
        total += _dtw_points(a[:, k : k + 1], b[:, k : k + 1], normalize)
    return total


@njit(cache=True)
def _dtw_pairs(flat, offsets, left, right, dependent, normalize):
    out = np.empty(left.shape[0])
    for p in range(left.shape[0]):
        i, j = left[p], right[p]
        a = flat[offsets[i] : offsets[i + 1]]
        b = flat[offsets[j] : offsets[j + 1]]
        out[p] = _dtw_kernel(a, b, dependent, normalize)
    return out


def zscore(series: np.ndarray) -> np.ndarray:
    """Standardize each column over time; constant columns become zeros."""
    series = np.asarray(series, dtype=float)
    mu = series.mean(axis=0)
    sd = series.std(axis=0)
    out = np.zeros_like(series)
    ok = sd > 0
    out[:, ok] = (series[:, ok] - mu[ok]) / sd[ok]
    return out


def _as_2d(series) -> np.ndarray:
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"series must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise EmptySeries("DTW needs at least one sample per series")
    return np.ascontiguousarray(arr)


def _prepare(series, config: DtwConfig) -> np.ndarray:
    arr = _as_2d(series)
    return zscore(arr) if config.zscore else arr


def dtw_distance(a, b, config: DtwConfig = DtwConfig()) -> float:
    """DTW distance between series of shape (La, d) and (Lb, d).

    Independent mode sums per-column 1-D distances; dependent mode warps all
    columns together with a Euclidean local cost.
    """
    a, b = _prepare(a, config), _prepare(b, config)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"width {a.shape[1]} != {b.shape[1]}")
    return float(_dtw_kernel(a, b, config.mode == "dependent", config.normalize == "path-length"))


def pairwise_distances(series: list, pairs: list[tuple[int, int]], config: DtwConfig = DtwConfig()) -> np.ndarray:
    """DTW distance for each ``(i, j)`` index pair into ``series``."""
    if not pairs:
        return np.empty(0)
    prepared = [_prepare(s, config) for s in series]
    widths = {s.shape[1] for s in prepared}
    if len(widths) != 1:
        raise DimensionMismatch(f"series widths differ: {sorted(widths)}")
    offsets = np.zeros(len(prepared) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([s.shape[0] for s in prepared])
    flat = np.ascontiguousarray(np.vstack(prepared))
    left = np.array([p[0] for p in pairs], dtype=np.int64)
    right = np.array([p[1] for p in pairs], dtype=np.int64)
    return _dtw_pairs(flat, offsets, left, right, config.mode == "dependent", config.normalize == "path-length")


@dataclass(frozen=True)
class DtwDistanceSet:
    task: str
    gesture: str
    group: ParameterGroup
    nor_nor: tuple[float, ...]
    err_nor: tuple[float, ...]

    def rows(self):
        """``(task, gesture, group, kind, distance)`` rows for CSV output."""
        for kind, values in (("nor_nor", self.nor_nor), ("err_nor", self.err_nor)):
            for v in values:
                yield (self.task, self.gesture, self.group.name, kind, v)


def build_distance_sets(
    instance_set: InstanceSet, group: ParameterGroup | str, config: DtwConfig = DtwConfig()
) -> DtwDistanceSet:
    if isinstance(group, str):
        group = parameter_group(group)
    n, e = len(instance_set.normal), len(instance_set.erroneous)
    if n < 2 or e < 1:
        raise InsufficientExamples(
            f"{instance_set.task} {instance_set.gesture}: need >= 2 normal and >= 1 "
            f"erroneous examples, have {n} and {e}"
        )
    series = [extract_group(i, group) for i in instance_set.normal + instance_set.erroneous]
    nn = list(itertools.combinations(range(n), 2))
    en = [(n + k, j) for k in range(e) for j in range(n)]
    dist = pairwise_distances(series, nn + en, config)
    return DtwDistanceSet(
        instance_set.task,
        instance_set.gesture,
        group,
        tuple(float(v) for v in dist[: len(nn)]),
        tuple(float(v) for v in dist[len(nn) :]),
    )
