"""Synthetic datasets with known ground truth, written in the ingest formats.

Transcripts are random walks on a grammar graph. Selected positions can be
corrupted so that each corruption produces exactly one procedural error.
Erroneous instances run longer and may carry a mean shift on one parameter
group. Kinematics are per-gesture sinusoids over normalized time plus noise.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import SpecError
from .ingest import (
    ERROR_MODES,
    N_COLUMNS,
    ORIENTATION_GESTURES,
    START,
    ErrorAnnotation,
    GrammarGraph,
    SkillRecord,
    TranscriptEntry,
    format_error_labels,
    format_skills,
    format_transcript,
    gesture_sort_key,
    parameter_group,
    parse_grammar,
)

BUNDLED_GRAMMARS = {"suturing": "suturing.txt", "needle_passing": "needle_passing.txt"}
TASK_PREFIX = {"Suturing": "Suturing", "NeedlePassing": "Needle_Passing"}
OOV_GESTURE = "G7"


def bundled_grammar(name: str) -> GrammarGraph:
    text = resources.files("surgerr").joinpath("grammars", BUNDLED_GRAMMARS[name]).read_text(encoding="utf-8")
    return parse_grammar(text)


@dataclass(frozen=True)
class MeanShift:
    gesture: str
    group: str
    amount: float


@dataclass
class SynthSpec:
    task: str = "Suturing"
    grammar: GrammarGraph = field(default_factory=lambda: bundled_grammar("suturing"))
    trials: int = 30
    seed: int = 0
    min_gestures: int = 6
    max_gestures: int = 14
    max_frames: int = 500
    lead_in_frames: int = 0
    normal_duration_mean: float = 24.0
    normal_duration_sd: float = 4.0
    erroneous_duration_offset: float = 20.0
    min_duration: int = 6
    error_rates: dict[str, float] = field(
        default_factory=lambda: {
            "multiple_attempts": 0.25,
            "needle_drop": 0.02,
            "needle_orientation": 0.3,
            "out_of_view": 0.1,
        }
    )
    noise_sd: float = 0.05
    shifts: list[MeanShift] = field(default_factory=list)
    corruption_rate: float = 0.0
    subjects: int = 8
    # optional explicit waveforms: {gesture: {column: [amplitude, frequency, phase, offset]}}
    waveforms: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.task not in TASK_PREFIX:
            raise SpecError(f"task must be one of {sorted(TASK_PREFIX)}")
        for mode, rate in self.error_rates.items():
            if mode not in ERROR_MODES:
                raise SpecError(f"unknown error mode {mode!r}")
            if not 0 <= rate <= 1:
                raise SpecError(f"rate for {mode} must lie in [0, 1]")
        if not 0 <= self.corruption_rate <= 1:
            raise SpecError("corruption_rate must lie in [0, 1]")
        if self.min_duration < 6:
            raise SpecError("durations must be >= 6 frames to survive downsampling by 3")
        if self.trials < 1 or self.subjects < 1:
            raise SpecError("trials and subjects must be positive")
        if not 1 <= self.min_gestures <= self.max_gestures:
            raise SpecError("need 1 <= min_gestures <= max_gestures")
        if self.normal_duration_mean < self.min_duration or self.normal_duration_sd < 0:
            raise SpecError("normal duration mean must be >= min_duration and sd >= 0")
        if self.erroneous_duration_offset < 0 or self.noise_sd < 0:
            raise SpecError("duration offset and noise must be non-negative")
        worst = self.lead_in_frames + self.min_duration
        if worst > self.max_frames:
            raise SpecError("max_frames cannot hold even one gesture")
        for s in self.shifts:
            parameter_group(s.group)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> SynthSpec:
        raw = dict(raw)
        grammar = raw.pop("grammar", "suturing")
        if isinstance(grammar, list):
            graph = GrammarGraph.from_edges(tuple(e) for e in grammar)
        elif grammar in BUNDLED_GRAMMARS:
            graph = bundled_grammar(grammar)
        else:
            path = Path(grammar)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            graph = parse_grammar(path)
        shifts = [MeanShift(**s) for s in raw.pop("shifts", [])]
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        spec = cls(grammar=graph, shifts=shifts, **raw)
        spec.validate()
        return spec


def _random_walk(graph: GrammarGraph, length: int, rng: np.random.Generator) -> list[str]:
    walk: list[str] = []
    options = sorted(graph.successors(START), key=gesture_sort_key)
    while len(walk) < length and options:
        g = options[rng.integers(len(options))]
        walk.append(g)
        options = sorted(graph.successors(g), key=gesture_sort_key)
    return walk


def corrupt_walk(
    graph: GrammarGraph, walk: list[str], rate: float, rng: np.random.Generator
) -> tuple[list[str], list[dict]]:
    """Substitute gestures so that each substitution yields exactly one flag.

    A replacement is an in-vocabulary gesture the predecessor does not allow
    but which itself allows the following gesture; when none exists an
    out-of-vocabulary token is used. Corrupted positions are never adjacent.
    """
    out = list(walk)
    events = []
    vocab = sorted(graph.vertices, key=gesture_sort_key)
    last = -2
    for p in range(len(walk)):
        if p == last + 1 or rng.random() >= rate:
            continue
        prev = walk[p - 1] if p else START
        nxt = walk[p + 1] if p + 1 < len(walk) else None
        allowed = graph.successors(prev)
        candidates = [
            g for g in vocab
            if g != walk[p] and g not in allowed and (nxt is None or nxt in graph.successors(g))
        ]
        if candidates:
            replacement, kind = candidates[rng.integers(len(candidates))], "substitution"
        else:
            replacement, kind = OOV_GESTURE, "unknown"
        out[p] = replacement
        events.append({"pos": p, "original": walk[p], "replacement": replacement, "kind": kind})
        last = p
    return out, events


class _Waveforms:
    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.cache: dict[str, np.ndarray] = {}

    def params(self, gesture: str) -> np.ndarray:
        """(76, 4) array of amplitude, frequency, phase, offset."""
        if gesture not in self.cache:
            rng = np.random.default_rng([self.spec.seed, gesture_sort_key(gesture), 7])
            p = np.column_stack([
                rng.uniform(0.5, 1.5, N_COLUMNS),
                rng.uniform(0.5, 2.0, N_COLUMNS),
                rng.uniform(0, 2 * math.pi, N_COLUMNS),
                rng.uniform(-1, 1, N_COLUMNS),
            ])
            for col, values in self.spec.waveforms.get(gesture, {}).items():
                p[int(col) - 1] = values
            self.cache[gesture] = p
        return self.cache[gesture]

    def render(self, gesture: str, duration: int) -> np.ndarray:
        p = self.params(gesture)
        u = np.linspace(0.0, 1.0, duration)[:, None]
        return p[:, 3] + p[:, 0] * np.sin(2 * math.pi * p[:, 1] * u + p[:, 2])


@dataclass
class SynthDataset:
    root: Path
    manifest_path: Path
    truth: dict


def _draw_modes(gesture: str, rates: dict[str, float], rng: np.random.Generator) -> dict[str, bool]:
    modes = {}
    for mode in ERROR_MODES:
        rate = rates.get(mode, 0.0)
        if mode == "needle_orientation" and gesture not in ORIENTATION_GESTURES:
            rate = 0.0
        modes[mode] = bool(rng.random() < rate)
    return modes


def generate(spec: SynthSpec, out_dir: Path) -> SynthDataset:
    """Write kinematics, transcripts, labels, skills, grammar, manifest and truth."""
    spec.validate()
    out_dir = Path(out_dir)
    (out_dir / "kinematics").mkdir(parents=True, exist_ok=True)
    (out_dir / "transcriptions").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    waves = _Waveforms(spec)
    shifts = {(s.gesture, s.group): s.amount for s in spec.shifts}

    annotations: list[ErrorAnnotation] = []
    skills: list[SkillRecord] = []
    truth = {"corruptions": {}, "erroneous": [], "procedural_errors": 0, "shifts": [s.__dict__ for s in spec.shifts]}
    levels = ("SP-Expert", "SP-Intermediate", "SP-Novice")
    for k in range(spec.trials):
        s_index = k % spec.subjects
        subject = chr(ord("B") + s_index) if spec.subjects <= 25 else f"S{s_index}"
        trial_id = f"{TASK_PREFIX[spec.task]}_{subject}{k // spec.subjects + 1:03d}"
        length = int(rng.integers(spec.min_gestures, spec.max_gestures + 1))
        walk = _random_walk(spec.grammar, length, rng)

        labels, durations = [], []
        budget = spec.max_frames - spec.lead_in_frames
        for g in walk:
            modes = _draw_modes(g, spec.error_rates, rng)
            d = max(spec.min_duration, round(rng.normal(spec.normal_duration_mean, spec.normal_duration_sd)))
            if any(modes.values()):
                d += round(spec.erroneous_duration_offset)
            if sum(durations) + d > budget:
                break
            labels.append(modes)
            durations.append(d)
        walk = walk[: len(durations)]
        sequence, events = corrupt_walk(spec.grammar, walk, spec.corruption_rate, rng)
        truth["corruptions"][trial_id] = events
        truth["procedural_errors"] += len(events)

        frames = rng.normal(0.0, spec.noise_sd, size=(spec.lead_in_frames + sum(durations), N_COLUMNS))
        entries = []
        start = spec.lead_in_frames + 1
        for index, (g, d, modes) in enumerate(zip(sequence, durations, labels)):
            if modes["needle_orientation"] and g not in ORIENTATION_GESTURES:
                # corruption changed the label; keep the instance erroneous
                modes = {**modes, "needle_orientation": False, "multiple_attempts": True}
            block = waves.render(g, d)
            if any(modes.values()):
                for (sg, group), amount in shifts.items():
                    if sg == g:
                        block[:, parameter_group(group).slice] += amount
                truth["erroneous"].append([trial_id, index])
            frames[start - 1 : start - 1 + d] += block
            entries.append(TranscriptEntry(start, start + d - 1, g))
            annotations.append(ErrorAnnotation(trial_id, index, g, **modes))
            start += d

        (out_dir / "kinematics" / f"{trial_id}.txt").write_text(
            "".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in frames), encoding="utf-8"
        )
        (out_dir / "transcriptions" / f"{trial_id}.txt").write_text(format_transcript(entries), encoding="utf-8")

        subs = tuple(int(v) for v in rng.integers(1, 6, size=6))
        skills.append(SkillRecord(trial_id, subject, levels[s_index % 3], sum(subs), subs))

    (out_dir / "labels.csv").write_text(format_error_labels(annotations), encoding="utf-8")
    (out_dir / "skills.csv").write_text(format_skills(skills), encoding="utf-8")
    (out_dir / "grammar.txt").write_text(spec.grammar.to_text(), encoding="utf-8")
    manifest = {
        "task": spec.task,
        "kinematics_dir": "kinematics",
        "transcripts_dir": "transcriptions",
        "labels": "labels.csv",
        "skills": "skills.csv",
        "grammar": "grammar.txt",
        "output_dir": "out",
        "fcm": {"rng_seed": spec.seed},
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    (out_dir / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", encoding="utf-8")
    return SynthDataset(out_dir, manifest_path, truth)


def load_spec(path: Path) -> SynthSpec:
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    return SynthSpec.from_dict(raw, base_dir=path.parent)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="synthgen", description="Generate a synthetic dataset with known ground truth")
    parser.add_argument("--spec", type=Path, required=True, help="JSON spec file")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        ds = generate(load_spec(args.spec), args.out)
    except (SpecError, OSError, ValueError) as exc:
        print(f"synthgen: {exc}", file=sys.stderr)
        return 1
    print(f"wrote dataset to {ds.root} (manifest: {ds.manifest_path})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
