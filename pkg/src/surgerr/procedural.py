"""Procedural error detection: walk a transcript against the task's grammar graph."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .errors import EmptyTranscript, MissingSkillRecord
from .ingest import SP_LEVELS, START, GrammarGraph, SkillRecord


@dataclass(frozen=True)
class FlaggedTransition:
    pos: int  # 0-based transcript position of the gesture that triggered the flag
    kind: str  # "transition", "start" or "unknown"
    gestures: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"pos": self.pos, "kind": self.kind, "gestures": list(self.gestures)}


@dataclass
class ProceduralErrorReport:
    trial_id: str
    errors: list[FlaggedTransition]
    merged_sequences: list[list[str]] = field(default_factory=list)

    @property
    def error_seq(self) -> list[list[str]]:
        return [list(e.gestures) for e in self.errors]

    @property
    def error_count(self) -> int:
        return len(self.errors)

    def to_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "errors": [e.to_dict() for e in self.errors],
            "chains": [list(c) for c in self.merged_sequences],
        }


def detect_procedural_errors(graph: GrammarGraph, transcript: Sequence[str], trial_id: str = "") -> ProceduralErrorReport:
    """Flag every gesture that the grammar does not allow at its position.

    An in-vocabulary gesture outside the allowed set is flagged together with
    its predecessor (START for the first gesture). An out-of-vocabulary gesture
    is flagged alone, and whatever follows it is then accepted.
    """
    if not transcript:
        raise EmptyTranscript(f"{trial_id}: empty transcript")
    errors = []
    allowed = graph.successors(START)
    n = len(transcript)
    for i, g in enumerate(transcript):
        if g in graph.vertices:
            if g not in allowed:
                if i == 0:
                    errors.append(FlaggedTransition(i, "start", (START, g)))
                else:
                    errors.append(FlaggedTransition(i, "transition", (transcript[i - 1], g)))
            allowed = graph.successors(g)
        else:
            errors.append(FlaggedTransition(i, "unknown", (g,)))
            allowed = frozenset({transcript[i + 1]}) if i + 1 < n else frozenset()
    report = ProceduralErrorReport(trial_id, errors)
    report.merged_sequences = merge_error_sequences(errors, transcript)
    return report


def merge_error_sequences(errors: Sequence[FlaggedTransition], transcript: Sequence[str]) -> list[list[str]]:
    """Chain flags at consecutive transcript positions into gesture sequences.

    A flagged transition at position p covers positions p-1 and p, a singleton
    covers p. Transitions join a chain they share a gesture with; singletons
    also join when they merely sit next to it.
    """
    chains: list[list[int]] = []
    last_single = False
    for e in sorted(errors, key=lambda e: e.pos):
        single = e.kind != "transition"
        lo = e.pos if single else e.pos - 1
        covered = list(range(lo, e.pos + 1))
        if chains and (lo <= chains[-1][-1] or (lo == chains[-1][-1] + 1 and (single or last_single))):
            chains[-1].extend(p for p in covered if p > chains[-1][-1])
        else:
            chains.append(covered)
        last_single = single
    return [[transcript[p] for p in chain] for chain in chains]


@dataclass(frozen=True)
class ProceduralSummary:
    sp_level: str
    total_errors: int
    erroneous_trials: int
    n_trials: int
    longest_chain: tuple[str, ...]

    @property
    def erroneous_fraction(self) -> float:
        return self.erroneous_trials / self.n_trials if self.n_trials else 0.0

    def to_dict(self) -> dict:
        return {
            "sp_level": self.sp_level,
            "total_errors": self.total_errors,
            "erroneous_trials": self.erroneous_trials,
            "n_trials": self.n_trials,
            "erroneous_fraction": self.erroneous_fraction,
            "longest_chain": "-".join(self.longest_chain),
        }


def summarize_procedural(
    reports: Iterable[ProceduralErrorReport], skills: Iterable[SkillRecord]
) -> list[ProceduralSummary]:
    """Per self-proclaimed level: error total, erroneous trials, longest chain.

    Levels without trials are omitted; a trailing "Total" row covers all trials.
    """
    by_trial = {s.trial_id: s for s in skills}
    buckets: dict[str, list[ProceduralErrorReport]] = {lvl: [] for lvl in SP_LEVELS}
    reports = list(reports)
    for r in reports:
        if r.trial_id not in by_trial:
            raise MissingSkillRecord(r.trial_id)
        buckets[by_trial[r.trial_id].sp_level].append(r)

    def summary(level: str, group: list[ProceduralErrorReport]) -> ProceduralSummary:
        longest: tuple[str, ...] = ()
        for r in group:
            for chain in r.merged_sequences:
                if len(chain) > len(longest):
                    longest = tuple(chain)
        return ProceduralSummary(
            level,
            sum(r.error_count for r in group),
            sum(1 for r in group if r.error_count),
            len(group),
            longest,
        )

    rows = [summary(lvl, group) for lvl, group in buckets.items() if group]
    rows.append(summary("Total", reports))
    return rows
