"""KL divergence between Err-Nor and Nor-Nor DTW distance distributions.

The direction is always D(Err-Nor || Nor-Nor), natural log.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .alignment import DtwDistanceSet
from .errors import DegenerateSigma, EmptySamples, InsufficientSamples
from .ingest import ParameterGroup, gesture_sort_key, group_order

METHODS = ("gaussian", "histogram")
DEFAULT_BINS = 32
DEFAULT_EPSILON = 1e-9
_MIN_SIGMA = 1e-12


def gaussian_kl(mu_p: float, sigma_p: float, mu_q: float, sigma_q: float) -> float:
    """KL(N(mu_p, sigma_p^2) || N(mu_q, sigma_q^2)) in closed form."""
    if not (sigma_p >= _MIN_SIGMA and sigma_q >= _MIN_SIGMA):
        raise DegenerateSigma(f"standard deviations must be >= {_MIN_SIGMA}: {sigma_p}, {sigma_q}")
    if mu_p == mu_q and sigma_p == sigma_q:
        return 0.0
    ratio = sigma_p / sigma_q
    z = (mu_p - mu_q) / sigma_q
    return max(0.0, 0.5 * (ratio * ratio - 1.0) - math.log(ratio) + 0.5 * z * z)


def discrete_kl(p_mass: Sequence[float], q_mass: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> float:
    """sum P ln(P/Q) over bins after smoothing empty bins with ``epsilon``.

    Both mass vectors are renormalized after smoothing; bins where P is zero
    contribute nothing beyond their smoothed mass.
    """
    p = np.asarray(p_mass, dtype=float)
    q = np.asarray(q_mass, dtype=float)
    if p.shape != q.shape or p.ndim != 1 or p.size == 0:
        raise EmptySamples("mass vectors must be non-empty and the same length")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    p = np.where(p > 0, p, epsilon)
    q = np.where(q > 0, q, epsilon)
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sum(p * np.log(p / q)))


def histogram_kl(
    p_samples: Sequence[float],
    q_samples: Sequence[float],
    bins: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    p = np.asarray(p_samples, dtype=float)
    q = np.asarray(q_samples, dtype=float)
    if p.size == 0 or q.size == 0:
        raise EmptySamples("histogram KL needs samples on both sides")
    if bins < 1:
        raise ValueError("bins must be positive")
    both = np.concatenate([p, q])
    edges = np.histogram_bin_edges(both, bins=bins, range=(both.min(), both.max()))
    hp, _ = np.histogram(p, bins=edges)
    hq, _ = np.histogram(q, bins=edges)
    return discrete_kl(hp / p.size, hq / q.size, epsilon)


@dataclass(frozen=True)
class KlEntry:
    task: str
    gesture: str
    group: ParameterGroup
    kl_value: float
    method: str


@dataclass
class KlReport:
    entries: list[KlEntry]
    method: str
    warnings: list[str] = field(default_factory=list)

    def ranking(self, task: str, gesture: str) -> list[ParameterGroup]:
        """Groups for one gesture by descending KL; ties keep the column order."""
        chosen = [e for e in self.entries if e.task == task and e.gesture == gesture]
        chosen.sort(key=lambda e: (-e.kl_value, group_order(e.group)))
        return [e.group for e in chosen]

    def rankings(self) -> dict[tuple[str, str], list[ParameterGroup]]:
        keys = sorted({(e.task, e.gesture) for e in self.entries}, key=lambda k: (k[0], gesture_sort_key(k[1])))
        return {k: self.ranking(*k) for k in keys}

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "entries": [
                {"task": e.task, "gesture": e.gesture, "group": e.group.name, "method": e.method, "kl": e.kl_value}
                for e in self.entries
            ],
            "ranking": [
                {"task": t, "gesture": g, "groups": [grp.name for grp in groups]}
                for (t, g), groups in self.rankings().items()
            ],
            "warnings": list(self.warnings),
        }

    def rows(self):
        for e in self.entries:
            yield (e.task, e.gesture, e.group.name, e.method, e.kl_value)


def _gaussian_fit(samples: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(samples, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1))


def distance_set_kl(ds: DtwDistanceSet, method: str = "gaussian", bins: int = DEFAULT_BINS,
                    epsilon: float = DEFAULT_EPSILON) -> float:
    if len(ds.err_nor) < 2 or len(ds.nor_nor) < 2:
        raise InsufficientSamples(
            f"{ds.task} {ds.gesture} {ds.group.name}: need >= 2 samples per side, "
            f"have err_nor={len(ds.err_nor)}, nor_nor={len(ds.nor_nor)}"
        )
    if method == "gaussian":
        if tuple(ds.err_nor) == tuple(ds.nor_nor):
            return 0.0
        return gaussian_kl(*_gaussian_fit(ds.err_nor), *_gaussian_fit(ds.nor_nor))
    if method == "histogram":
        return histogram_kl(ds.err_nor, ds.nor_nor, bins, epsilon)
    raise ValueError(f"method must be one of {METHODS}")


def kl_report(
    distance_sets: Iterable[DtwDistanceSet],
    method: str = "gaussian",
    bins: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
) -> KlReport:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    entries, notes = [], []
    for ds in distance_sets:
        try:
            value = distance_set_kl(ds, method, bins, epsilon)
        except (InsufficientSamples, DegenerateSigma) as exc:
            notes.append(f"skipped {ds.task} {ds.gesture} {ds.group.name}: {exc}")
            continue
        entries.append(KlEntry(ds.task, ds.gesture, ds.group, value, method))
    return KlReport(entries, method, notes)
