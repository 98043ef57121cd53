"""Run manifests, input validation and the end-to-end analysis pipeline."""

from __future__ import annotations

import json
import os
import shutil
import warnings
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .alignment import DtwConfig, DtwDistanceSet, build_distance_sets
from .divergence import DEFAULT_BINS, DEFAULT_EPSILON, METHODS, KlReport, kl_report
from .errors import (
    AnalysisError,
    InsufficientExamples,
    ManifestError,
    MissingAnnotation,
    MissingSkillRecord,
    TooFewPoints,
    TooShort,
    UnsupportedCount,
)
from .ingest import (
    PARAMETER_GROUPS,
    ErrorAnnotation,
    GrammarGraph,
    KinematicTrial,
    SkillRecord,
    TranscriptEntry,
    consensus,
    gesture_sort_key,
    parse_error_labels,
    parse_grammar,
    parse_kinematics,
    parse_skills,
    parse_transcript,
)
from .procedural import ProceduralErrorReport, ProceduralSummary, detect_procedural_errors, summarize_procedural
from .report import OutputWriter, emit_plot_data
from .segmentation import (
    DEFAULT_MIN_ERRONEOUS,
    TASKS,
    GestureInstance,
    InstanceSet,
    analyzable_sets,
    attach_annotations,
    build_instance_sets,
    segment_trial,
)
from .statistics import (
    CorrelationResult,
    ErrorCountTable,
    SkillBreakdown,
    TTestResult,
    error_count_table,
    one_tailed_ttest,
    pearson,
    skill_breakdowns,
)
from .trajectory import CLASSES, AverageTrajectory, FcmConfig, average_trajectory, target_length

STAGES = ("exec", "kl", "trajavg", "proc", "stats")


class StageFailure(Exception):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")


class ValidationFailed(Exception):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__("; ".join(report.errors))


# -- manifest ---------------------------------------------------------------


@dataclass
class RunManifest:
    task: str
    kinematics_dir: Path
    transcripts_dir: Path
    labels: Path
    skills: Path
    grammar: Path
    output_dir: Path
    dtw: DtwConfig = field(default_factory=DtwConfig)
    fcm: FcmConfig = field(default_factory=FcmConfig)
    method: str = "gaussian"
    bins: int = DEFAULT_BINS
    epsilon: float = DEFAULT_EPSILON
    min_erroneous: int = DEFAULT_MIN_ERRONEOUS
    trajectory_columns: str | list[int] = "top-group"
    target_scope: str = "gesture"
    clamp: bool = False
    pooled_t: bool = False
    sample_rate_hz: float = 30.0
    echo: dict = field(default_factory=dict)

    def config_dict(self) -> dict:
        return {
            "task": self.task,
            "dtw": self.dtw.to_dict(),
            "fcm": self.fcm.to_dict(),
            "divergence": {"method": self.method, "bins": self.bins, "epsilon": self.epsilon},
            "min_erroneous": self.min_erroneous,
            "trajectory": {"columns": self.trajectory_columns, "target_scope": self.target_scope},
            "flags": {"clamp": self.clamp, "pooled_t": self.pooled_t},
            "sample_rate_hz": self.sample_rate_hz,
        }


_PATH_KEYS = ("kinematics_dir", "transcripts_dir", "labels", "skills", "grammar")


def manifest_from_dict(raw: dict, base_dir: Path = Path("."), overrides: dict | None = None) -> RunManifest:
    raw = json.loads(json.dumps(raw))  # deep copy
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("clamp", "pooled_t"):
            raw.setdefault("flags", {})[key] = value
        elif key == "method":
            raw.setdefault("divergence", {})["method"] = value
        elif key == "seed":
            raw.setdefault("fcm", {})["rng_seed"] = value
        else:
            raw[key] = value
    known = {"task", "output_dir", "dtw", "fcm", "divergence", "min_erroneous", "trajectory", "flags",
             "sample_rate_hz", *_PATH_KEYS}
    unknown = set(raw) - known
    if unknown:
        raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
    missing = [k for k in ("task", *_PATH_KEYS) if k not in raw]
    if missing:
        raise ManifestError(f"manifest is missing {missing}")
    if raw["task"] not in TASKS:
        raise ManifestError(f"task must be one of {TASKS}, got {raw['task']!r}")

    def path(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    try:
        div = raw.get("divergence", {})
        traj = raw.get("trajectory", {})
        flags = raw.get("flags", {})
        manifest = RunManifest(
            task=raw["task"],
            kinematics_dir=path(raw["kinematics_dir"]),
            transcripts_dir=path(raw["transcripts_dir"]),
            labels=path(raw["labels"]),
            skills=path(raw["skills"]),
            grammar=path(raw["grammar"]),
            output_dir=path(raw.get("output_dir", "out")),
            dtw=DtwConfig(**raw.get("dtw", {})),
            fcm=FcmConfig(**raw.get("fcm", {})),
            method=div.get("method", "gaussian"),
            bins=int(div.get("bins", DEFAULT_BINS)),
            epsilon=float(div.get("epsilon", DEFAULT_EPSILON)),
            min_erroneous=int(raw.get("min_erroneous", DEFAULT_MIN_ERRONEOUS)),
            trajectory_columns=traj.get("columns", "top-group"),
            target_scope=traj.get("target_scope", "gesture"),
            clamp=bool(flags.get("clamp", False)),
            pooled_t=bool(flags.get("pooled_t", False)),
            sample_rate_hz=float(raw.get("sample_rate_hz", 30.0)),
            # the output location is not part of the analysis, so reruns elsewhere match byte for byte
            echo={k: v for k, v in raw.items() if k != "output_dir"},
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"invalid manifest: {exc}") from None
    if manifest.method not in METHODS:
        raise ManifestError(f"divergence method must be one of {METHODS}")
    if manifest.target_scope not in ("gesture", "task"):
        raise ManifestError("trajectory.target_scope must be 'gesture' or 'task'")
    cols = manifest.trajectory_columns
    if cols != "top-group" and not (isinstance(cols, list) and all(isinstance(c, int) and 39 <= c <= 76 for c in cols)):
        raise ManifestError("trajectory.columns must be 'top-group' or a list of columns in 39..76")
    return manifest


def load_manifest(path: Path, overrides: dict | None = None) -> RunManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ManifestError("manifest must be a JSON object")
    return manifest_from_dict(raw, path.parent, overrides)


# -- loading and validation -------------------------------------------------


@dataclass
class Dataset:
    trials: dict[str, KinematicTrial]
    transcripts: dict[str, list[TranscriptEntry]]
    annotations: list[ErrorAnnotation]
    skills: list[SkillRecord]
    grammar: GrammarGraph | None
    instances: list[GestureInstance] = field(default_factory=list)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {"ok": self.ok, "errors": list(self.errors), "warnings": list(self.warnings)}


def _err(exc: BaseException, where: str = "") -> str:
    prefix = f"{where}: " if where else ""
    return f"{prefix}{type(exc).__name__}: {exc}"


def _merge_labels(rows: Iterable[ErrorAnnotation], report: ValidationReport) -> list[ErrorAnnotation]:
    grouped: dict[tuple[str, int], list[ErrorAnnotation]] = {}
    for a in rows:
        grouped.setdefault(a.key, []).append(a)
    out = []
    for key in sorted(grouped):
        group = grouped[key]
        if len(group) == 1:
            out.append(group[0])
            continue
        try:
            out.append(consensus(group))
        except (UnsupportedCount, AnalysisError) as exc:
            report.errors.append(_err(exc, f"labels {key[0]} #{key[1]}"))
    return out


def load_dataset(manifest: RunManifest) -> tuple[Dataset, ValidationReport]:
    """Parse every input, collecting all problems instead of stopping at the first."""
    report = ValidationReport()
    for name in ("kinematics_dir", "transcripts_dir"):
        p = getattr(manifest, name)
        if not p.is_dir():
            report.errors.append(f"{name}: directory not found: {p}")
    for name in ("labels", "skills", "grammar"):
        p = getattr(manifest, name)
        if not p.is_file():
            report.errors.append(f"{name}: file not found: {p}")

    kin_files = {p.stem: p for p in sorted(manifest.kinematics_dir.glob("*.txt"))} if manifest.kinematics_dir.is_dir() else {}
    tr_files = {p.stem: p for p in sorted(manifest.transcripts_dir.glob("*.txt"))} if manifest.transcripts_dir.is_dir() else {}
    for tid in sorted(set(tr_files) - set(kin_files)):
        report.errors.append(f"{tid}: transcript has no kinematics file")
    for tid in sorted(set(kin_files) - set(tr_files)):
        report.warnings.append(f"{tid}: kinematics without transcript; trial skipped")

    trials, transcripts = {}, {}
    for tid in sorted(set(kin_files) & set(tr_files)):
        try:
            trials[tid] = parse_kinematics(kin_files[tid], tid, manifest.sample_rate_hz)
        except (AnalysisError, OSError, UnicodeDecodeError) as exc:
            report.errors.append(_err(exc, f"{kin_files[tid]}"))
        try:
            transcripts[tid] = parse_transcript(tr_files[tid])
            if not transcripts[tid]:
                report.errors.append(f"{tr_files[tid]}: transcript is empty")
        except (AnalysisError, OSError, UnicodeDecodeError) as exc:
            report.errors.append(_err(exc, f"{tr_files[tid]}"))

    annotations: list[ErrorAnnotation] = []
    if manifest.labels.is_file():
        try:
            annotations = _merge_labels(parse_error_labels(manifest.labels), report)
        except (AnalysisError, OSError, UnicodeDecodeError) as exc:
            report.errors.append(_err(exc, str(manifest.labels)))
    skills: list[SkillRecord] = []
    if manifest.skills.is_file():
        try:
            skills = parse_skills(manifest.skills)
        except (AnalysisError, OSError, UnicodeDecodeError) as exc:
            report.errors.append(_err(exc, str(manifest.skills)))
    grammar = None
    if manifest.grammar.is_file():
        try:
            grammar = parse_grammar(manifest.grammar)
        except (AnalysisError, OSError, UnicodeDecodeError) as exc:
            report.errors.append(_err(exc, str(manifest.grammar)))

    ds = Dataset(trials, transcripts, annotations, skills, grammar)

    # joins
    skill_ids = {s.trial_id for s in skills}
    for tid in sorted(transcripts):
        if manifest.skills.is_file() and tid not in skill_ids:
            report.errors.append(_err(MissingSkillRecord(tid)))
    instances: list[GestureInstance] = []
    for tid in sorted(set(trials) & set(transcripts)):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                instances.extend(segment_trial(trials[tid], transcripts[tid], clamp=manifest.clamp))
            except AnalysisError as exc:
                report.errors.append(_err(exc))
        report.warnings.extend(str(w.message) for w in caught)
    by_key = {a.key for a in annotations}
    if manifest.labels.is_file():
        for inst in instances:
            if (inst.trial_id, inst.index_in_trial) not in by_key:
                report.errors.append(_err(MissingAnnotation(inst.trial_id, inst.index_in_trial)))
        try:
            ds.instances = attach_annotations(
                [i for i in instances if (i.trial_id, i.index_in_trial) in by_key], annotations
            )
        except AnalysisError as exc:
            report.errors.append(_err(exc))
        known = {(i.trial_id, i.index_in_trial) for i in instances}
        extra = sorted(k for k in by_key if k not in known and k[0] in trials)
        for tid, idx in extra:
            report.warnings.append(f"label for {tid} #{idx} has no transcript entry; ignored")
    return ds, report


def validate(manifest: RunManifest) -> ValidationReport:
    return load_dataset(manifest)[1]


# -- report -----------------------------------------------------------------


@dataclass
class AnalysisReport:
    manifest: RunManifest
    stages_run: tuple[str, ...] = ()
    validation: ValidationReport = field(default_factory=ValidationReport)
    error_counts: ErrorCountTable | None = None
    analyzed_gestures: list[str] = field(default_factory=list)
    distance_sets: list[DtwDistanceSet] = field(default_factory=list)
    kl: KlReport | None = None
    trajectories: list[AverageTrajectory] = field(default_factory=list)
    procedural: list[ProceduralErrorReport] = field(default_factory=list)
    procedural_summary: list[ProceduralSummary] = field(default_factory=list)
    duration_tests: dict[str, TTestResult] = field(default_factory=dict)
    duration_means: dict[str, dict] = field(default_factory=dict)
    trial_correlations: dict[str, CorrelationResult | str] = field(default_factory=dict)
    skills: SkillBreakdown | None = None
    instance_durations: list[tuple] = field(default_factory=list)
    trial_rows: list[tuple] = field(default_factory=list)
    warnings: list[dict] = field(default_factory=list)

    def warn(self, stage: str, message: str) -> None:
        self.warnings.append({"stage": stage, "message": message})

    def to_dict(self) -> dict:
        m = self.manifest
        out: dict = {
            "tool": {"name": "surgerr", "version": __version__},
            "manifest": m.echo,
            "config": m.config_dict(),
            "stages": list(self.stages_run),
            "validation": self.validation.to_dict(),
        }
        if self.error_counts is not None:
            out["error_counts"] = self.error_counts.to_dict()
        if "kl" in self.stages_run or self.kl is not None:
            out["executional"] = {
                "analyzed_gestures": list(self.analyzed_gestures),
                "distance_sets": [
                    {"task": d.task, "gesture": d.gesture, "group": d.group.name,
                     "n_nor_nor": len(d.nor_nor), "n_err_nor": len(d.err_nor)}
                    for d in self.distance_sets
                ],
                "kl": self.kl.to_dict() if self.kl else None,
            }
        if "trajavg" in self.stages_run:
            out["trajectories"] = [
                {"task": t.task, "gesture": t.gesture, "column": t.variable_column, "class": t.cls,
                 "target_length": t.target_length, "centers": [list(c) for c in t.centers]}
                for t in self.trajectories
            ]
        if "proc" in self.stages_run or "stats" in self.stages_run:
            out["procedural"] = {
                "reports": [r.to_dict() for r in self.procedural],
                "summary": [s.to_dict() for s in self.procedural_summary],
                "total_errors": sum(r.error_count for r in self.procedural),
            }
        if "stats" in self.stages_run:
            out["statistics"] = {
                "duration_tests": {
                    g: {**self.duration_means[g], **t.to_dict()} for g, t in self.duration_tests.items()
                },
                "trial_correlations": {
                    k: (v.to_dict() if isinstance(v, CorrelationResult) else {"error": v})
                    for k, v in self.trial_correlations.items()
                },
                "skills": self.skills.to_dict() if self.skills else None,
            }
        out["warnings"] = list(self.warnings)
        return out


# -- stages -----------------------------------------------------------------


def _stage_kl(report: AnalysisReport, sets: list[InstanceSet]) -> None:
    m = report.manifest
    report.distance_sets = [build_distance_sets(s, g, m.dtw) for s in sets for g in PARAMETER_GROUPS]
    report.kl = kl_report(report.distance_sets, m.method, m.bins, m.epsilon)
    for note in report.kl.warnings:
        report.warn("kl", note)


def _stage_trajavg(report: AnalysisReport, sets: list[InstanceSet], all_sets: list[InstanceSet]) -> None:
    m = report.manifest
    task_targets = {}
    if m.target_scope == "task":
        for cls in CLASSES:
            durations = [i.duration_frames for s in all_sets for i in s.instances(cls)]
            if durations:
                task_targets[cls] = target_length(durations)
    for s in sets:
        if m.trajectory_columns == "top-group":
            ranking = report.kl.ranking(s.task, s.gesture) if report.kl else []
            if not ranking:
                report.warn("trajavg", f"{s.gesture}: no KL ranking; no trajectory columns chosen")
                continue
            columns = list(ranking[0].columns)
        else:
            columns = list(m.trajectory_columns)
        for col in columns:
            for cls in CLASSES:
                if len(s.instances(cls)) < 2:
                    report.warn("trajavg", f"{s.gesture} {cls}: fewer than 2 examples; skipped")
                    continue
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    try:
                        report.trajectories.append(
                            average_trajectory(s, col, cls, m.fcm, target=task_targets.get(cls))
                        )
                    except (TooShort, TooFewPoints, InsufficientExamples) as exc:
                        report.warn("trajavg", f"{s.gesture} column {col} {cls}: {exc}; skipped")
                for w in caught:
                    report.warn("trajavg", f"{s.gesture} column {col} {cls}: {w.message}")


def _stage_proc(report: AnalysisReport, ds: Dataset) -> None:
    for tid in sorted(ds.transcripts):
        labels = [e.gesture for e in ds.transcripts[tid]]
        report.procedural.append(detect_procedural_errors(ds.grammar, labels, tid))
    report.procedural_summary = summarize_procedural(report.procedural, ds.skills)


def _stage_stats(report: AnalysisReport, ds: Dataset, all_sets: list[InstanceSet]) -> None:
    m = report.manifest
    for s in all_sets:
        if len(s.normal) < 2 or len(s.erroneous) < 2:
            report.warn("stats", f"{s.gesture}: too few examples for a duration t-test")
            continue
        err = [i.duration_frames for i in s.erroneous]
        nor = [i.duration_frames for i in s.normal]
        report.duration_tests[s.gesture] = one_tailed_ttest(err, nor, pooled=m.pooled_t)
        report.duration_means[s.gesture] = {
            "mean_erroneous": sum(err) / len(err),
            "mean_normal": sum(nor) / len(nor),
        }

    exec_counts = {tid: 0 for tid in ds.transcripts}
    for inst in ds.instances:
        exec_counts[inst.trial_id] += inst.annotation.n_errors
    proc_counts = {r.trial_id: r.error_count for r in report.procedural}
    tids = sorted(t for t in ds.transcripts if t in ds.trials)
    durations = [ds.trials[t].n_frames for t in tids]
    report.trial_rows = [(t, ds.trials[t].n_frames, exec_counts[t], proc_counts.get(t, 0)) for t in tids]
    for name, counts in (("executional_errors_vs_duration", exec_counts), ("procedural_errors_vs_duration", proc_counts)):
        try:
            report.trial_correlations[name] = pearson([counts[t] for t in tids], durations)
        except AnalysisError as exc:
            report.trial_correlations[name] = _err(exc)
            report.warn("stats", f"{name}: {exc}")
    report.skills = skill_breakdowns(exec_counts, ds.skills, proc_counts)
    for note in report.skills.warnings:
        report.warn("stats", note)


def _run_stage(name: str, fn, *args) -> None:
    try:
        fn(*args)
    except StageFailure:
        raise
    except Exception as exc:  # noqa: BLE001 - every stage failure aborts the run
        raise StageFailure(name, exc) from exc


def analyze(manifest: RunManifest, stages: Iterable[str] = STAGES) -> AnalysisReport:
    """Run the requested stages in memory; raises ValidationFailed or StageFailure."""
    stages = tuple(s for s in STAGES if s in set(stages))
    ds, validation = load_dataset(manifest)
    if not validation.ok:
        raise ValidationFailed(validation)
    report = AnalysisReport(manifest, stages, validation)
    for w in validation.warnings:
        report.warn("ingest", w)

    all_sets: list[InstanceSet] = []

    def segmentation():
        all_sets.extend(build_instance_sets(ds.instances, ds.annotations, manifest.task))

    _run_stage("segmentation", segmentation)
    sets, notes = analyzable_sets(all_sets, manifest.min_erroneous)
    report.analyzed_gestures = [s.gesture for s in sets]
    for n in notes:
        report.warn("segmentation", n)
    if not sets and ("kl" in stages or "trajavg" in stages):
        report.warn("segmentation", "no gesture has enough examples; executional sections are empty")
    report.instance_durations = [
        (manifest.task, i.trial_id, i.index_in_trial, i.gesture, "erroneous" if i.is_erroneous else "normal",
         i.duration_frames)
        for i in sorted(ds.instances, key=lambda i: (i.trial_id, i.index_in_trial))
    ] if "stats" in stages else []

    if "exec" in stages:
        _run_stage("exec", lambda: setattr(report, "error_counts", error_count_table(all_sets)))
    need_kl = "kl" in stages or ("trajavg" in stages and manifest.trajectory_columns == "top-group")
    if need_kl:
        _run_stage("kl", _stage_kl, report, sets)
    if "trajavg" in stages:
        _run_stage("trajavg", _stage_trajavg, report, sets, all_sets)
    if "proc" in stages or "stats" in stages:
        _run_stage("proc", _stage_proc, report, ds)
    if "stats" in stages:
        _run_stage("stats", _stage_stats, report, ds, all_sets)
    return report


def write_outputs(report: AnalysisReport, writer: OutputWriter) -> None:
    stages = report.stages_run
    writer.write_json("report.json", report.to_dict())
    if report.error_counts is not None:
        writer.write_csv(
            "error_counts.csv",
            ["task", "gesture", "multiple_attempts", "needle_drop", "needle_orientation", "out_of_view",
             "erroneous", "total", "erroneous_fraction", "multiple_errors"],
            [(r.task, r.gesture, *r.mode_counts.values(), r.erroneous, r.total, r.erroneous_fraction,
              r.multiple_errors) for r in report.error_counts.rows],
        )
    if report.kl is not None and "kl" in stages:
        writer.write_csv("kl.csv", ["task", "gesture", "group", "method", "kl"], report.kl.rows())
    if "trajavg" in stages and report.trajectories:
        writer.write_csv(
            "trajectories.csv",
            ["task", "gesture", "column", "class", "time", "value"],
            [row for t in report.trajectories for row in t.rows()],
        )
    if "proc" in stages:
        writer.write_csv(
            "procedural_errors.csv",
            ["trial_id", "pos", "kind", "gestures"],
            [(r.trial_id, e.pos, e.kind, "-".join(e.gestures)) for r in report.procedural for e in r.errors],
        )
        writer.write_csv(
            "procedural_summary.csv",
            ["task", "sp_level", "total_errors", "erroneous_trials", "n_trials", "longest_chain"],
            [(report.manifest.task, s.sp_level, s.total_errors, s.erroneous_trials, s.n_trials,
              "-".join(s.longest_chain)) for s in report.procedural_summary],
        )
    if "stats" in stages:
        writer.write_csv(
            "duration_ttests.csv",
            ["task", "gesture", "n_normal", "n_erroneous", "mean_normal", "mean_erroneous", "t", "dof", "p"],
            [(report.manifest.task, g, t.n_b, t.n_a, report.duration_means[g]["mean_normal"],
              report.duration_means[g]["mean_erroneous"], t.t_statistic, t.dof, t.p_value)
             for g, t in sorted(report.duration_tests.items(), key=lambda kv: gesture_sort_key(kv[0]))],
        )
        writer.write_csv(
            "trial_correlations.csv",
            ["task", "relation", "r", "p", "n"],
            [(report.manifest.task, k, v.r, v.p_value, v.n) for k, v in report.trial_correlations.items()
             if isinstance(v, CorrelationResult)],
        )
        if report.skills is not None:
            writer.write_csv(
                "grs_correlations.csv",
                ["task", "score", "r", "p", "n"],
                [(report.manifest.task, k, v.r, v.p_value, v.n) for k, v in report.skills.correlations.items()
                 if isinstance(v, CorrelationResult)],
            )
            writer.write_csv(
                "executional_by_skill.csv",
                ["task", "scheme", "band", "n", "mean", "std"],
                [(report.manifest.task, "SP", b.band, b.n, b.mean, b.std) for b in report.skills.by_sp]
                + [(report.manifest.task, "GRS", b.band, b.n, b.mean, b.std) for b in report.skills.by_grs],
            )
    emit_plot_data(report, writer)
    writer.write_index()


def run_pipeline(manifest: RunManifest, stages: Iterable[str] = STAGES) -> AnalysisReport:
    """Analyze and write all outputs; nothing is left behind if a stage fails."""
    out = Path(manifest.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        staging = out / ".staging"
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir()
    except OSError as exc:
        raise OSError(f"cannot write to output directory {out}: {exc.strerror or exc}") from exc
    try:
        report = analyze(manifest, stages)
        writer = OutputWriter(staging)
        _run_stage("output", write_outputs, report, writer)
        for rel in writer.files:
            target = out / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            os.replace(staging / rel, target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return report
