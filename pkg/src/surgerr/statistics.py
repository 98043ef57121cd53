"""Duration t-tests, Pearson correlations, error-count tables and skill breakdowns."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConstantInput, LengthMismatch, MissingSkillRecord, TooFewSamples
from .ingest import ERROR_MODES, GRS_BANDS, GRS_SUBSCORES, SP_LEVELS, SkillRecord, gesture_sort_key
from .segmentation import InstanceSet


def t_sf(t: float, dof: float) -> float:
    """Upper-tail probability P(T > t) of Student's t with ``dof`` degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    return float(special.stdtr(dof, -t))


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    dof: float
    n_a: int
    n_b: int
    alternative: str = "greater"
    pooled: bool = False
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "t": self.t_statistic,
            "p": self.p_value,
            "dof": self.dof,
            "n_erroneous": self.n_a,
            "n_normal": self.n_b,
            "alternative": self.alternative,
            "variance": "pooled" if self.pooled else "welch",
            "degenerate": self.degenerate,
        }


def one_tailed_ttest(erroneous: Sequence[float], normal: Sequence[float], pooled: bool = False) -> TTestResult:
    """Test whether ``erroneous`` has a larger mean than ``normal``.

    Welch's unequal-variance test by default; ``pooled`` switches to
    Student's equal-variance version. Two constant, equal samples give the
    degenerate result t=0, p=0.5.
    """
    a = np.asarray(erroneous, dtype=float)
    b = np.asarray(normal, dtype=float)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise TooFewSamples(f"t-test needs >= 2 samples per side, have {na} and {nb}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("t-test samples must be finite")
    diff = a.mean() - b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if pooled:
        sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
        se2 = sp2 * (1.0 / na + 1.0 / nb)
        dof = float(na + nb - 2)
    else:
        qa, qb = va / na, vb / nb
        se2 = qa + qb
        dof = float(se2**2 / (qa**2 / (na - 1) + qb**2 / (nb - 1))) if se2 > 0 else float(na + nb - 2)
    if se2 == 0:
        if diff == 0:
            return TTestResult(0.0, 0.5, dof, na, nb, pooled=pooled, degenerate=True)
        t = math.copysign(math.inf, diff)
        return TTestResult(t, t_sf(t, dof), dof, na, nb, pooled=pooled, degenerate=True)
    t = float(diff / math.sqrt(se2))
    p = 0.5 if t == 0 else t_sf(t, dof)
    return TTestResult(t, p, dof, na, nb, pooled=pooled)


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int

    def to_dict(self) -> dict:
        return {"r": self.r, "p": self.p_value, "n": self.n}


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Sample Pearson r with a two-sided p from the t transform on n-2 dof."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.size != ya.size:
        raise LengthMismatch(f"{xa.size} x values vs {ya.size} y values")
    n = xa.size
    if n < 3:
        raise TooFewSamples("Pearson correlation needs at least 3 pairs")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ConstantInput("Pearson correlation is undefined for a constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return CorrelationResult(r, 0.0, n)
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return CorrelationResult(r, min(1.0, 2.0 * t_sf(abs(t), n - 2)), n)


def format_p(p: float) -> str:
    """Human-readable p-value; tiny values collapse to '<1e-15'."""
    return "<1e-15" if p < 1e-15 else f"{p:.3g}"


# -- executional error counts ---------------------------------------------


@dataclass(frozen=True)
class ErrorCountRow:
    task: str
    gesture: str  # "All" for the task roll-up
    mode_counts: dict[str, int]
    erroneous: int
    total: int
    multiple_errors: int
    single_mode: dict[str, int]  # erroneous gestures with exactly this one mode

    @property
    def erroneous_fraction(self) -> float:
        return self.erroneous / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "gesture": self.gesture,
            **{m: self.mode_counts[m] for m in ERROR_MODES},
            "erroneous": self.erroneous,
            "total": self.total,
            "erroneous_fraction": self.erroneous_fraction,
            "multiple_errors": self.multiple_errors,
            "distribution": {**self.single_mode, "multiple_errors": self.multiple_errors,
                             "normal": self.total - self.erroneous},
        }


@dataclass
class ErrorCountTable:
    rows: list[ErrorCountRow]

    def row(self, task: str, gesture: str) -> ErrorCountRow:
        for r in self.rows:
            if r.task == task and r.gesture == gesture:
                return r
        raise KeyError((task, gesture))

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}


def _count_row(task: str, gesture: str, annotations: list) -> ErrorCountRow:
    modes = {m: sum(getattr(a, m) for a in annotations) for m in ERROR_MODES}
    single = {m: 0 for m in ERROR_MODES}
    multiple = 0
    for a in annotations:
        k = a.n_errors
        if k >= 2:
            multiple += 1
        elif k == 1:
            single[next(m for m, v in a.modes.items() if v)] += 1
    return ErrorCountRow(
        task, gesture, modes, sum(a.is_erroneous for a in annotations), len(annotations), multiple, single
    )


def error_count_table(instance_sets: Iterable[InstanceSet]) -> ErrorCountTable:
    by_task: dict[str, list[InstanceSet]] = {}
    for s in instance_sets:
        by_task.setdefault(s.task, []).append(s)
    rows = []
    for task in sorted(by_task):
        every = []
        for s in sorted(by_task[task], key=lambda s: gesture_sort_key(s.gesture)):
            anns = [i.annotation for i in s.normal + s.erroneous]
            every.extend(anns)
            rows.append(_count_row(task, s.gesture, anns))
        rows.append(_count_row(task, "All", every))
    return ErrorCountTable(rows)


# -- skill breakdowns -----------------------------------------------------


@dataclass(frozen=True)
class BandSummary:
    band: str
    n: int
    mean: float
    std: float
    values: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"band": self.band, "n": self.n, "mean": self.mean, "std": self.std, "values": list(self.values)}


@dataclass
class SkillBreakdown:
    by_sp: list[BandSummary]
    by_grs: list[BandSummary]
    correlations: dict[str, CorrelationResult | str]  # str carries the reason when undefined
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "executional_by_sp": [b.to_dict() for b in self.by_sp],
            "executional_by_grs": [b.to_dict() for b in self.by_grs],
            "procedural_vs_grs": {
                k: (v.to_dict() if isinstance(v, CorrelationResult) else {"error": v})
                for k, v in self.correlations.items()
            },
            "warnings": list(self.warnings),
        }


def _band_summaries(values_by_band: dict[str, list[int]], order: Sequence[str], notes: list[str]) -> list[BandSummary]:
    out = []
    for band in order:
        vals = values_by_band.get(band, [])
        if not vals:
            notes.append(f"no trials in band {band}; omitted")
            continue
        arr = np.asarray(vals, dtype=float)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        out.append(BandSummary(band, len(vals), float(arr.mean()), std, tuple(vals)))
    return out


def skill_breakdowns(
    executional_counts: Mapping[str, int],
    skills: Iterable[SkillRecord],
    procedural_counts: Mapping[str, int] | None = None,
) -> SkillBreakdown:
    """Group per-trial executional error counts by SP and GRS band and
    correlate per-trial procedural error counts with GRS total and sub-scores."""
    by_trial = {s.trial_id: s for s in skills}
    notes: list[str] = []
    sp: dict[str, list[int]] = {}
    grs: dict[str, list[int]] = {}
    for trial in sorted(executional_counts):
        rec = by_trial.get(trial)
        if rec is None:
            raise MissingSkillRecord(trial)
        sp.setdefault(rec.sp_level, []).append(executional_counts[trial])
        grs.setdefault(rec.grs_band, []).append(executional_counts[trial])

    correlations: dict[str, CorrelationResult | str] = {}
    if procedural_counts:
        trials = sorted(procedural_counts)
        for t in trials:
            if t not in by_trial:
                raise MissingSkillRecord(t)
        counts = [procedural_counts[t] for t in trials]
        targets = {"grs_total": [by_trial[t].grs_total for t in trials]}
        if all(by_trial[t].grs_sub is not None for t in trials):
            for k, name in enumerate(GRS_SUBSCORES):
                targets[name] = [by_trial[t].grs_sub[k] for t in trials]
        else:
            notes.append("GRS sub-scores missing for some trials; sub-score correlations skipped")
        for name, scores in targets.items():
            try:
                correlations[name] = pearson(counts, scores)
            except (ConstantInput, TooFewSamples) as exc:
                correlations[name] = f"{type(exc).__name__}: {exc}"
    return SkillBreakdown(_band_summaries(sp, SP_LEVELS, notes), _band_summaries(grs, GRS_BANDS, notes), correlations, notes)
