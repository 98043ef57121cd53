"""Slice trials into gesture instances and group them by gesture and class."""

from __future__ import annotations

import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .errors import AnnotationMismatch, MissingAnnotation, RangeExceedsTrial
from .ingest import (
    PARAMETER_GROUPS,
    ErrorAnnotation,
    KinematicTrial,
    ParameterGroup,
    TranscriptEntry,
    gesture_sort_key,
    parameter_group,
)

TASKS = ("Suturing", "NeedlePassing")
DEFAULT_MIN_ERRONEOUS = 5


class ClampWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GestureInstance:
    trial_id: str
    gesture: str
    index_in_trial: int
    start_frame: int
    end_frame: int
    kinematics: np.ndarray
    annotation: ErrorAnnotation | None = None

    @property
    def duration_frames(self) -> int:
        return self.end_frame - self.start_frame + 1

    @property
    def frame_range(self) -> tuple[int, int]:
        return (self.start_frame, self.end_frame)

    @property
    def is_erroneous(self) -> bool:
        return self.annotation is not None and self.annotation.is_erroneous


@dataclass(frozen=True)
class InstanceSet:
    task: str
    gesture: str
    normal: tuple[GestureInstance, ...]
    erroneous: tuple[GestureInstance, ...]

    @property
    def total(self) -> int:
        return len(self.normal) + len(self.erroneous)

    def instances(self, cls: str) -> tuple[GestureInstance, ...]:
        if cls == "normal":
            return self.normal
        if cls == "erroneous":
            return self.erroneous
        raise ValueError(f"class must be 'normal' or 'erroneous', not {cls!r}")


def segment_trial(
    trial: KinematicTrial, transcript: Sequence[TranscriptEntry], clamp: bool = False
) -> list[GestureInstance]:
    """One instance per transcript entry, with the entry's rows copied out.

    With ``clamp`` an entry running past the last frame is cut to the trial
    length (entries starting past it are dropped) and a ClampWarning issued.
    """
    T = trial.n_frames
    out = []
    for index, entry in enumerate(transcript):
        start, end = entry.start_frame, entry.end_frame
        if end > T:
            if not clamp:
                raise RangeExceedsTrial(trial.trial_id, entry, T)
            if start > T:
                warnings.warn(f"{trial.trial_id}: dropped entry #{index} starting past frame {T}", ClampWarning)
                continue
            warnings.warn(f"{trial.trial_id}: clamped entry #{index} end {end} -> {T}", ClampWarning)
            end = T
        rows = trial.frames[start - 1 : end].copy()
        rows.setflags(write=False)
        out.append(GestureInstance(trial.trial_id, entry.gesture, index, start, end, rows))
    return out


def extract_group(instance: GestureInstance, group: ParameterGroup | str) -> np.ndarray:
    """The instance's columns for one parameter group, shape (duration, width)."""
    if isinstance(group, str):
        group = parameter_group(group)
    return instance.kinematics[:, group.slice]


def attach_annotations(
    instances: Iterable[GestureInstance], annotations: Iterable[ErrorAnnotation]
) -> list[GestureInstance]:
    by_key = {a.key: a for a in annotations}
    out = []
    for inst in instances:
        ann = by_key.get((inst.trial_id, inst.index_in_trial))
        if ann is None:
            raise MissingAnnotation(inst.trial_id, inst.index_in_trial)
        if ann.gesture != inst.gesture:
            raise AnnotationMismatch(
                f"{inst.trial_id} #{inst.index_in_trial}: transcript says {inst.gesture}, "
                f"label says {ann.gesture}"
            )
        out.append(replace(inst, annotation=ann))
    return out


def build_instance_sets(
    instances: Iterable[GestureInstance], annotations: Iterable[ErrorAnnotation], task: str = "Suturing"
) -> list[InstanceSet]:
    joined = attach_annotations(instances, annotations)
    by_gesture: dict[str, list[GestureInstance]] = {}
    for inst in joined:
        by_gesture.setdefault(inst.gesture, []).append(inst)
    sets = []
    for gesture in sorted(by_gesture, key=gesture_sort_key):
        group = by_gesture[gesture]
        sets.append(
            InstanceSet(
                task,
                gesture,
                tuple(i for i in group if not i.is_erroneous),
                tuple(i for i in group if i.is_erroneous),
            )
        )
    return sets


def analyzable_sets(
    sets: Iterable[InstanceSet], min_erroneous: int = DEFAULT_MIN_ERRONEOUS, min_normal: int = 2
) -> tuple[list[InstanceSet], list[str]]:
    """Split off sets with too few examples for executional analysis."""
    kept, notes = [], []
    for s in sets:
        if len(s.erroneous) < min_erroneous:
            notes.append(
                f"{s.task} {s.gesture}: {len(s.erroneous)} erroneous examples "
                f"(< {min_erroneous}); excluded from executional analysis"
            )
        elif len(s.normal) < min_normal:
            notes.append(f"{s.task} {s.gesture}: {len(s.normal)} normal examples; excluded")
        else:
            kept.append(s)
    return kept, notes


def psm_block(instance: GestureInstance) -> np.ndarray:
    """Columns 39..76 rebuilt by stacking the ten parameter groups."""
    return np.hstack([extract_group(instance, g) for g in PARAMETER_GROUPS])
