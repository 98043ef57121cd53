import numpy as np
import pytest

from oracles.walk_naive import naive_flags
from surgerr.errors import EmptyTranscript, MissingSkillRecord
from surgerr.ingest import START, GrammarGraph, SkillRecord
from surgerr.procedural import (
    FlaggedTransition,
    ProceduralErrorReport,
    detect_procedural_errors,
    merge_error_sequences,
    summarize_procedural,
)
from surgerr.synthgen import bundled_grammar

SMALL = GrammarGraph.from_edges([(START, "G1"), ("G1", "G2"), ("G2", "G3"), ("G3", "G2")])


def test_valid_walk():
    assert detect_procedural_errors(SMALL, ["G1", "G2", "G3", "G2"]).error_seq == []


def test_skipped_gesture():
    rep = detect_procedural_errors(SMALL, ["G1", "G3", "G2"])
    assert rep.error_seq == [["G1", "G3"]]
    assert rep.errors[0].kind == "transition" and rep.errors[0].pos == 1


def test_unknown_gesture_resets_allowed_set():
    rep = detect_procedural_errors(SMALL, ["G1", "G7", "G2"])
    assert rep.error_seq == [["G7"]]
    assert rep.errors[0].kind == "unknown"


def test_bad_first_gesture_is_start_kind():
    rep = detect_procedural_errors(SMALL, ["G2", "G3"])
    assert rep.errors == [FlaggedTransition(0, "start", (START, "G2"))]


def test_trailing_unknown():
    assert detect_procedural_errors(SMALL, ["G1", "G2", "G12"]).error_seq == [["G12"]]


def test_empty_transcript():
    with pytest.raises(EmptyTranscript):
        detect_procedural_errors(SMALL, [])


def test_suturing_chain():
    graph = bundled_grammar("suturing")
    assert "G5" not in graph.successors("G4")
    rep = detect_procedural_errors(graph, ["G1", "G2", "G3", "G6", "G4", "G5", "G6", "G2"])
    assert rep.error_seq == [["G4", "G5"], ["G5", "G6"], ["G6", "G2"]]
    assert rep.merged_sequences == [["G4", "G5", "G6", "G2"]]


def _t(pos, a, b):
    return FlaggedTransition(pos, "transition", (a, b))


def test_merge_rules():
    transcript = ["G1", "G2", "G3", "G4", "G5", "G6", "G2", "G8", "G9"]
    flags = [_t(4, "G4", "G5"), _t(5, "G5", "G6"), _t(6, "G6", "G2")]
    assert merge_error_sequences(flags, transcript) == [["G4", "G5", "G6", "G2"]]
    assert merge_error_sequences([_t(2, "G2", "G3"), _t(7, "G2", "G8")], transcript) == [["G2", "G3"], ["G2", "G8"]]
    assert merge_error_sequences([], transcript) == []


def test_merge_transitions_two_apart_stay_separate():
    transcript = ["G1", "G2", "G3", "G4", "G5"]
    flags = [_t(1, "G1", "G2"), _t(3, "G3", "G4")]
    assert merge_error_sequences(flags, transcript) == [["G1", "G2"], ["G3", "G4"]]


def test_merge_singleton_next_to_transition():
    transcript = ["G1", "G2", "G7", "G3"]
    flags = [_t(1, "G1", "G2"), FlaggedTransition(2, "unknown", ("G7",))]
    assert merge_error_sequences(flags, transcript) == [["G1", "G2", "G7"]]


VOCAB = ["G1", "G2", "G3", "G4", "G5", "G6", "G8", "G9", "G10", "G11"]


def _random_graph(rng):
    verts = list(rng.choice(VOCAB, size=int(rng.integers(2, len(VOCAB) + 1)), replace=False))
    edges = {(START, verts[int(rng.integers(len(verts)))])}
    for a in verts:
        for b in verts:
            if rng.random() < 0.35:
                edges.add((a, b))
    return sorted(edges)


def _walk(graph, rng, length):
    walk, options = [], sorted(graph.successors(START))
    while len(walk) < length and options:
        g = options[int(rng.integers(len(options)))]
        walk.append(g)
        options = sorted(graph.successors(g))
    return walk


def test_matches_naive_retrace():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        edges = _random_graph(rng)
        graph = GrammarGraph.from_edges(edges)
        pool = VOCAB + ["G7", "G12"]
        transcript = [pool[int(k)] for k in rng.integers(len(pool), size=int(rng.integers(1, 15)))]
        assert detect_procedural_errors(graph, transcript).error_seq == naive_flags(edges, transcript)


def test_walks_clean_and_corruptions_flagged():
    rng = np.random.default_rng(99)
    checked = 0
    for _ in range(300):
        graph = GrammarGraph.from_edges(_random_graph(rng))
        walk = _walk(graph, rng, int(rng.integers(1, 20)))
        assert detect_procedural_errors(graph, walk).error_seq == []
        p = int(rng.integers(len(walk)))
        prev = walk[p - 1] if p else START
        bad = [g for g in VOCAB if g in graph.vertices and g not in graph.successors(prev)]
        if not bad:
            continue
        corrupted = list(walk)
        corrupted[p] = bad[int(rng.integers(len(bad)))]
        rep = detect_procedural_errors(graph, corrupted)
        assert rep.error_count >= 1
        assert rep.errors[0].pos == p and rep.errors[0].gestures[-1] == corrupted[p]
        checked += 1
    assert checked > 100


def test_deterministic():
    graph = bundled_grammar("needle_passing")
    t = ["G1", "G5", "G3", "G6", "G2", "G11"]
    assert detect_procedural_errors(graph, t).to_dict() == detect_procedural_errors(graph, t).to_dict()


def _report(tid, n):
    return ProceduralErrorReport(tid, [_t(k + 1, "G1", "G3") for k in range(n)], [["G1", "G3"]] if n else [])


def _skill(tid, level="SP-Novice"):
    return SkillRecord(tid, "S", level, 12)


def test_summary_novice_row():
    counts = [5, 4, 3, 2, 2, 2, 2, 1, 1, 1] + [0] * 9
    assert sum(counts) == 23
    reports = [_report(f"T{i}", n) for i, n in enumerate(counts)]
    rows = summarize_procedural(reports, [_skill(f"T{i}") for i in range(19)])
    nov = rows[0]
    assert (nov.sp_level, nov.total_errors, nov.erroneous_trials, nov.n_trials) == ("SP-Novice", 23, 10, 19)
    assert nov.erroneous_fraction == 10 / 19
    assert rows[-1].sp_level == "Total"


def test_summary_no_errors_and_single_trial():
    rows = summarize_procedural([_report("A", 0), _report("B", 0)], [_skill("A"), _skill("B", "SP-Expert")])
    assert all(r.total_errors == 0 and r.erroneous_fraction == 0 for r in rows)
    (row, total) = summarize_procedural([_report("A", 3)], [_skill("A")])
    assert (row.total_errors, row.erroneous_trials, row.n_trials) == (3, 1, 1)


def test_summary_missing_skill():
    with pytest.raises(MissingSkillRecord):
        summarize_procedural([_report("A", 1)], [])
