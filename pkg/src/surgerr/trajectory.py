"""Class-average trajectories: time normalization plus fuzzy c-means."""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientExamples, NonConvergence, TooFewPoints, TooShort
from .segmentation import InstanceSet

DOWNSAMPLE = 3
CLASSES = ("normal", "erroneous")


@dataclass(frozen=True)
class FcmConfig:
    cluster_count: int = 15
    m: float = 2.0
    tolerance: float = 1e-5
    max_iterations: int = 300
    rng_seed: int = 0
    scale: bool = False

    def __post_init__(self):
        if self.cluster_count < 1:
            raise ValueError("cluster_count must be positive")
        if not self.m > 1:
            raise ValueError("fuzzifier m must be > 1")
        if not self.tolerance > 0 or self.max_iterations < 1:
            raise ValueError("tolerance and max_iterations must be positive")

    def to_dict(self) -> dict:
        return {
            "cluster_count": self.cluster_count,
            "m": self.m,
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
            "rng_seed": self.rng_seed,
            "scale": self.scale,
        }


def downsample(signal: Sequence[float], factor: int = DOWNSAMPLE) -> np.ndarray:
    """Keep samples 0, factor, 2*factor, ..."""
    return np.asarray(signal, dtype=float)[::factor]


def time_normalize(signal: Sequence[float], target_length: int) -> np.ndarray:
    reduced = downsample(signal)
    ld = reduced.shape[0]
    if ld < 2:
        raise TooShort(f"signal of length {len(signal)} leaves {ld} sample(s) after downsampling")
    if target_length < 1:
        raise ValueError("target_length must be positive")
    if target_length == 1:
        return reduced[:1].copy()
    k = np.arange(target_length, dtype=float)
    positions = k * (ld - 1) / (target_length - 1)
    return np.interp(positions, np.arange(ld, dtype=float), reduced)


@dataclass
class FcmResult:
    centers: np.ndarray  # (c, 2)
    memberships: np.ndarray  # (n, c)
    objective: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def fcm_objective(points: np.ndarray, centers: np.ndarray, memberships: np.ndarray, m: float) -> float:
    sq = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return float((memberships**m * sq).sum())


def _memberships(points: np.ndarray, centers: np.ndarray, m: float) -> np.ndarray:
    sq = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    u = np.empty_like(sq)
    hit = sq == 0.0
    on_center = hit.any(axis=1)
    # a point sitting on one or more centers splits its membership among them
    u[on_center] = hit[on_center] / hit[on_center].sum(axis=1, keepdims=True)
    rest = ~on_center
    if rest.any():
        # u_ij proportional to d_ij^(-2/(m-1)); scale by the row minimum first
        d = sq[rest]
        w = (d.min(axis=1, keepdims=True) / d) ** (1.0 / (m - 1.0))
        u[rest] = w / w.sum(axis=1, keepdims=True)
    return u


def _centers(points: np.ndarray, memberships: np.ndarray, m: float) -> np.ndarray:
    w = memberships**m
    return (w.T @ points) / w.sum(axis=0)[:, None]


def fuzzy_cmeans(points, config: FcmConfig = FcmConfig(), init_centers=None, callback=None) -> FcmResult:
    """Standard fuzzy c-means on 2-D points.

    Initial centers are distinct points drawn with ``config.rng_seed`` unless
    ``init_centers`` is given. Stops when no center moves more than
    ``config.tolerance``; hitting ``max_iterations`` emits NonConvergence.
    ``callback(iteration, centers, memberships)`` is called after every update.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise ValueError("points must be a 2-D array")
    c, m = config.cluster_count, config.m
    if x.shape[0] < c:
        raise TooFewPoints(f"{x.shape[0]} points for {c} clusters")
    if init_centers is None:
        rng = np.random.default_rng(config.rng_seed)
        centers = x[np.sort(rng.choice(x.shape[0], size=c, replace=False))].copy()
    else:
        centers = np.array(init_centers, dtype=float)
        if centers.shape != (c, x.shape[1]):
            raise ValueError(f"init_centers must have shape {(c, x.shape[1])}")
    result = FcmResult(centers, np.full((x.shape[0], c), 1.0 / c))
    for it in range(1, config.max_iterations + 1):
        u = _memberships(x, centers, m)
        new_centers = _centers(x, u, m)
        shift = float(np.max(np.sqrt(((new_centers - centers) ** 2).sum(axis=1))))
        centers = new_centers
        result.objective.append(fcm_objective(x, centers, u, m))
        result.memberships, result.centers, result.n_iter = u, centers, it
        if callback is not None:
            callback(it, centers, u)
        if shift <= config.tolerance:
            result.converged = True
            break
    if not result.converged:
        warnings.warn(f"fuzzy c-means did not converge in {config.max_iterations} iterations", NonConvergence)
    return result


@dataclass(frozen=True)
class AverageTrajectory:
    task: str
    gesture: str
    variable_column: int
    cls: str
    target_length: int
    centers: tuple[tuple[float, float], ...]  # (time_index, value), sorted by time

    def rows(self):
        for t, v in self.centers:
            yield (self.task, self.gesture, self.variable_column, self.cls, t, v)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def target_length(durations: Sequence[int]) -> int:
    """Mean duration rounded to the nearest frame, at least 2."""
    if not durations:
        raise InsufficientExamples("no durations to average")
    return max(2, round_half_up(sum(durations) / len(durations)))


def average_trajectory(
    instance_set: InstanceSet,
    variable_column: int,
    cls: str,
    config: FcmConfig = FcmConfig(),
    target: int | None = None,
) -> AverageTrajectory:
    """Pool time-normalized examples of one class and cluster them.

    ``target`` overrides the default target length (the mean duration of the
    class within this gesture), e.g. for a task-wide mean.
    """
    if not 1 <= variable_column <= 76:
        raise ValueError("variable_column is 1-indexed in 1..76")
    instances = instance_set.instances(cls)
    if len(instances) < 2:
        raise InsufficientExamples(
            f"{instance_set.task} {instance_set.gesture} {cls}: need >= 2 examples, have {len(instances)}"
        )
    if target is None:
        target = target_length([i.duration_frames for i in instances])
    time_index = np.arange(target, dtype=float)
    pooled = []
    for inst in instances:
        values = time_normalize(inst.kinematics[:, variable_column - 1], target)
        pooled.append(np.column_stack([time_index, values]))
    points = np.vstack(pooled)

    if config.scale:
        mu, sd = points.mean(axis=0), points.std(axis=0)
        sd[sd == 0] = 1.0
        fit = fuzzy_cmeans((points - mu) / sd, config)
        centers = fit.centers * sd + mu
    else:
        centers = fuzzy_cmeans(points, config).centers
    order = np.lexsort((centers[:, 1], centers[:, 0]))
    return AverageTrajectory(
        instance_set.task,
        instance_set.gesture,
        variable_column,
        cls,
        target,
        tuple((float(t), float(v)) for t, v in centers[order]),
    )
