"""Parsers and domain types for kinematics, transcripts, labels, skills and grammars.

Every ``parse_*`` function accepts file content as ``str``/``bytes``, an
iterable of lines (an open text file works), or a ``pathlib.Path`` to read.
Frames are 1-indexed and transcript ranges are inclusive on both ends.
"""

from __future__ import annotations

import csv
import io
import math
import os
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyFile,
    MalformedRow,
    MismatchedInstance,
    NoStartError,
    OrderError,
    OverlapError,
    ParseError,
    RangeError,
    RubricViolation,
    UnsupportedCount,
)

N_COLUMNS = 76
DEFAULT_SAMPLE_RATE_HZ = 30.0

# Gestures used by Suturing and Needle Passing. Anything else of the form
# G<n> still parses; the procedural detector treats it as out-of-vocabulary.
VOCABULARY = ("G1", "G2", "G3", "G4", "G5", "G6", "G8", "G9", "G10", "G11")
_GESTURE_RE = re.compile(r"^G[1-9][0-9]*$")

ERROR_MODES = ("multiple_attempts", "needle_drop", "needle_orientation", "out_of_view")
ORIENTATION_GESTURES = frozenset({"G4", "G8"})

SP_LEVELS = ("SP-Novice", "SP-Intermediate", "SP-Expert")
GRS_BANDS = ("GRS-Novice", "GRS-Intermediate", "GRS-Expert")
GRS_SUBSCORES = (
    "respect_for_tissue",
    "suture_needle_handling",
    "time_and_motion",
    "flow_of_operation",
    "overall_performance",
    "quality_of_final_product",
)

LABEL_HEADER = ["trial_id", "gesture_index", "gesture", *ERROR_MODES]
SKILL_HEADER = ["trial_id", "subject", "sp_hours_band"] + [f"grs{i}" for i in range(1, 7)]


def parse_gesture(token: str) -> str:
    """Validate a gesture token; unknown but well-formed labels pass through."""
    token = token.strip()
    if not _GESTURE_RE.match(token):
        raise ParseError(f"not a gesture label: {token!r}")
    return token


def is_known_gesture(label: str) -> bool:
    return label in VOCABULARY


def gesture_sort_key(label: str) -> int:
    return int(label[1:])


@dataclass(frozen=True)
class ParameterGroup:
    name: str
    first: int  # 1-indexed, inclusive
    last: int

    @property
    def width(self) -> int:
        return self.last - self.first + 1

    @property
    def columns(self) -> range:
        return range(self.first, self.last + 1)

    @property
    def slice(self) -> slice:
        """0-based slice into a 76-column frame matrix."""
        return slice(self.first - 1, self.last)


PARAMETER_GROUPS = (
    ParameterGroup("R Pos", 39, 41),
    ParameterGroup("R Rot Mat", 42, 50),
    ParameterGroup("R Lin Vel", 51, 53),
    ParameterGroup("R Rot Vel", 54, 56),
    ParameterGroup("R Grip Ang", 57, 57),
    ParameterGroup("L Pos", 58, 60),
    ParameterGroup("L Rot Mat", 61, 69),
    ParameterGroup("L Lin Vel", 70, 72),
    ParameterGroup("L Rot Vel", 73, 75),
    ParameterGroup("L Grip Ang", 76, 76),
)
_GROUPS_BY_NAME = {g.name: g for g in PARAMETER_GROUPS}
PSM_COLUMNS = range(39, 77)


def parameter_group(name: str) -> ParameterGroup:
    try:
        return _GROUPS_BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown parameter group {name!r}") from None


def group_order(group: ParameterGroup) -> int:
    return PARAMETER_GROUPS.index(group)


@dataclass(frozen=True)
class KinematicTrial:
    trial_id: str
    frames: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        if frames.ndim != 2 or frames.shape[1] != N_COLUMNS:
            raise ParseError(f"{self.trial_id}: frames must be T x {N_COLUMNS}, got {frames.shape}")
        if frames.shape[0] < 1:
            raise EmptyFile(f"{self.trial_id}: no frames")
        if not np.all(np.isfinite(frames)):
            raise ParseError(f"{self.trial_id}: non-finite kinematic value")
        if not self.sample_rate_hz > 0:
            raise ParseError("sample_rate_hz must be positive")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def columns(self, first: int, last: int | None = None) -> np.ndarray:
        """Columns ``first..last`` (1-indexed, inclusive)."""
        last = first if last is None else last
        return self.frames[:, first - 1 : last]

    def group(self, group: ParameterGroup | str) -> np.ndarray:
        if isinstance(group, str):
            group = parameter_group(group)
        return self.frames[:, group.slice]


@dataclass(frozen=True)
class TranscriptEntry:
    start_frame: int
    end_frame: int
    gesture: str

    @property
    def duration(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class ErrorAnnotation:
    trial_id: str
    gesture_index: int
    gesture: str
    multiple_attempts: bool = False
    needle_drop: bool = False
    needle_orientation: bool = False
    out_of_view: bool = False

    def __post_init__(self):
        if self.needle_orientation and self.gesture not in ORIENTATION_GESTURES:
            raise RubricViolation(
                f"{self.trial_id} #{self.gesture_index}: needle orientation is only "
                f"defined for G4 and G8, not {self.gesture}"
            )

    @property
    def modes(self) -> dict[str, bool]:
        return {m: getattr(self, m) for m in ERROR_MODES}

    @property
    def n_errors(self) -> int:
        return sum(self.modes.values())

    @property
    def is_erroneous(self) -> bool:
        return self.n_errors > 0

    @property
    def key(self) -> tuple[str, int]:
        return (self.trial_id, self.gesture_index)


@dataclass(frozen=True)
class SkillRecord:
    trial_id: str
    subject: str
    sp_level: str
    grs_total: int
    grs_sub: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.sp_level not in SP_LEVELS:
            raise ParseError(f"unknown SP level {self.sp_level!r}")
        if self.grs_sub is not None:
            if len(self.grs_sub) != 6:
                raise ParseError("expected six GRS sub-scores")
            for s in self.grs_sub:
                if not 1 <= s <= 5:
                    raise RangeError(f"{self.trial_id}: GRS sub-score {s} outside 1..5")
            if sum(self.grs_sub) != self.grs_total:
                raise RangeError(f"{self.trial_id}: GRS total {self.grs_total} != sum of sub-scores")
        if not 0 <= self.grs_total <= 30:
            raise RangeError(f"{self.trial_id}: GRS total {self.grs_total} outside 0..30")

    @property
    def grs_band(self) -> str:
        return grs_band(self.grs_total)


def grs_band(total: int) -> str:
    if 0 <= total <= 9:
        return "GRS-Novice"
    if 10 <= total <= 19:
        return "GRS-Intermediate"
    if 20 <= total <= 30:
        return "GRS-Expert"
    raise RangeError(f"GRS total {total} outside 0..30")


START = "START"


@dataclass(frozen=True)
class GrammarGraph:
    vertices: frozenset[str]
    edges: frozenset[tuple[str, str]]
    start_successors: frozenset[str]
    _succ: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not self.start_successors:
            raise NoStartError("grammar graph has no START successors")
        for src, dst in self.edges:
            if src not in self.vertices or dst not in self.vertices:
                raise ParseError(f"edge {src}->{dst} references an unknown vertex")
        if not self.start_successors <= self.vertices:
            raise ParseError("START successors must be vertices")
        succ: dict[str, frozenset[str]] = {}
        for v in self.vertices:
            succ[v] = frozenset(d for s, d in self.edges if s == v)
        succ[START] = self.start_successors
        object.__setattr__(self, "_succ", succ)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]]) -> GrammarGraph:
        edges = list(edges)
        start = frozenset(d for s, d in edges if s == START)
        inner = frozenset((s, d) for s, d in edges if s != START)
        vertices = frozenset(v for e in inner for v in e) | start
        return cls(vertices, inner, start)

    def successors(self, gesture: str) -> frozenset[str]:
        return self._succ.get(gesture, frozenset())

    def __contains__(self, gesture: str) -> bool:
        return gesture in self.vertices

    def to_text(self) -> str:
        lines = [f"START {g}" for g in sorted(self.start_successors, key=gesture_sort_key)]
        for s, d in sorted(self.edges, key=lambda e: (gesture_sort_key(e[0]), gesture_sort_key(e[1]))):
            lines.append(f"{s} {d}")
        return "\n".join(lines) + "\n"


# -- reading helpers -------------------------------------------------------


def _lines(source) -> list[str]:
    if isinstance(source, (Path, os.PathLike)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    if isinstance(source, bytes):
        return source.decode("utf-8").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    return [line.rstrip("\r\n") for line in source]


def _csv_rows(source) -> list[list[str]]:
    text = "\n".join(_lines(source))
    return [row for row in csv.reader(io.StringIO(text)) if any(c.strip() for c in row)]


# -- parsers ---------------------------------------------------------------


def parse_kinematics(source, trial_id: str, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> KinematicTrial:
    rows = []
    for lineno, line in enumerate(_lines(source), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != N_COLUMNS:
            raise MalformedRow(lineno, len(tokens))
        try:
            values = [float(t) for t in tokens]
        except ValueError as exc:
            raise MalformedRow(lineno, len(tokens), str(exc)) from None
        if not all(math.isfinite(v) for v in values):
            raise MalformedRow(lineno, len(tokens), "non-finite value")
        rows.append(values)
    if not rows:
        raise EmptyFile(f"{trial_id}: kinematics file has no rows")
    return KinematicTrial(trial_id, np.array(rows, dtype=float), sample_rate_hz)


def format_kinematics(trial: KinematicTrial) -> str:
    """Inverse of :func:`parse_kinematics`; ``repr`` keeps every float exact."""
    return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in trial.frames)


def parse_transcript(source) -> list[TranscriptEntry]:
    entries: list[TranscriptEntry] = []
    for lineno, line in enumerate(_lines(source), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 3:
            raise ParseError(f"transcript line {lineno}: expected '<start> <end> <label>'")
        try:
            start, end = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise ParseError(f"transcript line {lineno}: frame numbers must be integers") from None
        gesture = parse_gesture(tokens[2])
        if start < 1:
            raise ParseError(f"transcript line {lineno}: frames are 1-indexed")
        if start > end:
            raise ParseError(f"transcript line {lineno}: start {start} > end {end}")
        if entries:
            prev = entries[-1]
            if start < prev.start_frame:
                raise OrderError(f"transcript line {lineno}: start frame {start} decreases")
            if start <= prev.end_frame:
                raise OverlapError(
                    f"transcript line {lineno}: {start}-{end} overlaps "
                    f"{prev.start_frame}-{prev.end_frame}"
                )
        entries.append(TranscriptEntry(start, end, gesture))
    return entries


def format_transcript(entries: Sequence[TranscriptEntry]) -> str:
    return "".join(f"{e.start_frame} {e.end_frame} {e.gesture}\n" for e in entries)


def _flag(cell: str, where: str) -> bool:
    cell = cell.strip()
    if cell not in ("0", "1"):
        raise ParseError(f"{where}: error-mode cells must be 0 or 1, got {cell!r}")
    return cell == "1"


def parse_error_labels(source) -> list[ErrorAnnotation]:
    rows = _csv_rows(source)
    if not rows:
        raise ParseError("label file is empty")
    header = [h.strip() for h in rows[0]]
    if header != LABEL_HEADER:
        raise ParseError(f"label header must be {','.join(LABEL_HEADER)}")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        where = f"label row {n}"
        if len(row) != len(LABEL_HEADER):
            raise ParseError(f"{where}: expected {len(LABEL_HEADER)} fields")
        try:
            index = int(row[1])
        except ValueError:
            raise ParseError(f"{where}: gesture_index must be an integer") from None
        if index < 0:
            raise ParseError(f"{where}: gesture_index must be >= 0")
        flags = [_flag(c, where) for c in row[3:]]
        out.append(ErrorAnnotation(row[0].strip(), index, parse_gesture(row[2]), *flags))
    return out


def format_error_labels(annotations: Iterable[ErrorAnnotation]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LABEL_HEADER)
    for a in annotations:
        writer.writerow([a.trial_id, a.gesture_index, a.gesture, *(int(v) for v in a.modes.values())])
    return buf.getvalue()


def consensus(annotations: Sequence[ErrorAnnotation]) -> ErrorAnnotation:
    """Merge two or three annotators' labels for one gesture instance.

    Each mode is voted independently: majority with three annotators; with
    two, a disagreement resolves to erroneous.
    """
    if not 2 <= len(annotations) <= 3:
        raise UnsupportedCount(f"consensus needs 2 or 3 annotators, got {len(annotations)}")
    first = annotations[0]
    for a in annotations[1:]:
        if (a.trial_id, a.gesture_index, a.gesture) != (first.trial_id, first.gesture_index, first.gesture):
            raise MismatchedInstance(f"annotations reference different instances: {first.key} vs {a.key}")
    need = 2 if len(annotations) == 3 else 1
    votes = {m: sum(getattr(a, m) for a in annotations) >= need for m in ERROR_MODES}
    return ErrorAnnotation(first.trial_id, first.gesture_index, first.gesture, **votes)


def parse_grammar(source) -> GrammarGraph:
    edges = set()
    for lineno, line in enumerate(_lines(source), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(f"grammar line {lineno}: expected 'SRC DST'")
        src, dst = tokens
        if src != START:
            src = parse_gesture(src)
        edges.add((src, parse_gesture(dst)))
    if not any(s == START for s, _ in edges):
        raise NoStartError("grammar has no 'START <gesture>' line")
    return GrammarGraph.from_edges(edges)


_SP_TOKENS = {
    "n": "SP-Novice", "novice": "SP-Novice", "sp-novice": "SP-Novice", "<10": "SP-Novice",
    "i": "SP-Intermediate", "intermediate": "SP-Intermediate",
    "sp-intermediate": "SP-Intermediate", "10-100": "SP-Intermediate",
    "e": "SP-Expert", "expert": "SP-Expert", "sp-expert": "SP-Expert", ">100": "SP-Expert",
}


def sp_level(token: str) -> str:
    try:
        return _SP_TOKENS[token.strip().lower()]
    except KeyError:
        raise ParseError(f"unknown self-proclaimed skill band {token!r}") from None


def parse_skills(source) -> list[SkillRecord]:
    """Parse the skills CSV.

    An optional trailing ``grs_total`` column may carry the total when the
    six sub-score cells are blank; when both are given they must agree.
    """
    rows = _csv_rows(source)
    if not rows:
        raise ParseError("skills file is empty")
    header = [h.strip() for h in rows[0]]
    has_total = header == SKILL_HEADER + ["grs_total"]
    if header != SKILL_HEADER and not has_total:
        raise ParseError(f"skills header must be {','.join(SKILL_HEADER)}")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"skills row {n}: expected {len(header)} fields")
        cells = [c.strip() for c in row]
        try:
            subs = None
            if any(cells[3:9]):
                subs = tuple(int(c) for c in cells[3:9])
            if has_total and cells[9]:
                total = int(cells[9])
            elif subs is not None:
                total = sum(subs)
            else:
                raise ParseError(f"skills row {n}: no GRS scores")
        except ValueError:
            raise ParseError(f"skills row {n}: GRS scores must be integers") from None
        out.append(SkillRecord(cells[0], cells[1], sp_level(cells[2]), total, subs))
    return out


def format_skills(records: Iterable[SkillRecord]) -> str:
    records = list(records)
    with_total = any(r.grs_sub is None for r in records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SKILL_HEADER + (["grs_total"] if with_total else []))
    band = {"SP-Novice": "N", "SP-Intermediate": "I", "SP-Expert": "E"}
    for r in records:
        row = [r.trial_id, r.subject, band[r.sp_level], *(r.grs_sub or ("",) * 6)]
        if with_total:
            row.append(r.grs_total)
        writer.writerow(row)
    return buf.getvalue()
