"""Numbered acceptance criteria. Each test prints its own PASS/FAIL line in
the terminal summary (see conftest.py)."""

import json
import os
import shutil
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from oracles.walk_naive import naive_flags
from oracles.dtw_brute import brute_dtw, brute_dtw_independent
from oracles.kl_quad import kl_quad
from surgerr import cli
from surgerr.alignment import DtwConfig, dtw_distance
from surgerr.divergence import gaussian_kl
from surgerr.errors import NonConvergence
from surgerr.ingest import START, GrammarGraph
from surgerr.pipeline import load_manifest, run_pipeline
from surgerr.procedural import detect_procedural_errors
from surgerr.statistics import one_tailed_ttest, pearson
from surgerr.trajectory import FcmConfig, fuzzy_cmeans

FIXTURES = json.loads((Path(__file__).parent / "data" / "stats_fixtures.json").read_text())
VOCAB = ["G1", "G2", "G3", "G4", "G5", "G6", "G8", "G9", "G10", "G11"]


def _note(record, text):
    record("detail", text)


@pytest.mark.acceptance(1, "DTW equals brute force over all monotone paths (500 pairs, exact, < 10 s)")
def test_dtw_oracle_equivalence(record_property):
    dtw_distance([0.0], [1.0])  # load the compiled kernel before timing
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(500):
        d = int(rng.integers(1, 3))
        a = rng.normal(size=(int(rng.integers(1, 9)), d))
        b = rng.normal(size=(int(rng.integers(1, 9)), d))
        pa, pb = [tuple(r) for r in a], [tuple(r) for r in b]
        mismatches += dtw_distance(a, b, DtwConfig(mode="dependent")) != brute_dtw(pa, pb)
        mismatches += dtw_distance(a, b) != brute_dtw_independent(pa, pb)
    elapsed = time.perf_counter() - start
    _note(record_property, f"{mismatches} mismatches, {elapsed:.2f} s")
    assert mismatches == 0
    assert elapsed < 10


@pytest.mark.acceptance(2, "Gaussian KL matches numerical integration within 1e-6 (200 draws, < 5 s)")
def test_gaussian_kl_integration(record_property):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        mp, mq = rng.uniform(-10, 10, 2)
        sp, sq = rng.uniform(0.1, 10, 2)
        worst = max(worst, abs(gaussian_kl(mp, sp, mq, sq) - kl_quad(mp, sp, mq, sq)))
    elapsed = time.perf_counter() - start
    _note(record_property, f"max abs error {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-6
    assert elapsed < 5


def _random_graph(rng):
    verts = list(rng.choice(VOCAB, size=int(rng.integers(2, len(VOCAB) + 1)), replace=False))
    edges = {(START, verts[int(rng.integers(len(verts)))])}
    for a in verts:
        for b in verts:
            if rng.random() < 0.35:
                edges.add((a, b))
    return sorted(edges)


@pytest.mark.acceptance(3, "grammar walk matches a naive re-trace; walks clean; corruptions flagged in place (< 10 s)")
def test_procedural_fidelity(record_property):
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    corrupted_checked = 0
    for _ in range(1000):
        edges = _random_graph(rng)
        graph = GrammarGraph.from_edges(edges)
        pool = VOCAB + ["G7", "G12"]
        transcript = [pool[int(k)] for k in rng.integers(len(pool), size=int(rng.integers(1, 16)))]
        assert detect_procedural_errors(graph, transcript).error_seq == naive_flags(edges, transcript)

        walk, options = [], sorted(graph.successors(START))
        for _ in range(int(rng.integers(1, 20))):
            if not options:
                break
            walk.append(options[int(rng.integers(len(options)))])
            options = sorted(graph.successors(walk[-1]))
        assert detect_procedural_errors(graph, walk).error_count == 0

        p = int(rng.integers(len(walk)))
        prev = walk[p - 1] if p else START
        bad = [g for g in sorted(graph.vertices) if g not in graph.successors(prev)]
        if bad:
            bent = list(walk)
            bent[p] = bad[int(rng.integers(len(bad)))]
            rep = detect_procedural_errors(graph, bent)
            assert rep.error_count >= 1 and rep.errors[0].pos == p
            corrupted_checked += 1
    elapsed = time.perf_counter() - start
    _note(record_property, f"{corrupted_checked} corruptions checked, {elapsed:.2f} s")
    assert elapsed < 10


@pytest.mark.acceptance(4, "FCM objective non-increasing, memberships row-stochastic (100 runs, c in {1,2,15})")
def test_fcm_properties(record_property):
    worst_row, rises = 0.0, 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        c = (1, 2, 15)[seed % 3]
        n = int(rng.integers(40, 160))
        t = np.tile(np.arange(20.0), n // 20 + 1)[:n]
        pts = np.column_stack([t, np.sin(t / 3) + rng.normal(0, 0.3, n)])
        rows = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergence)
            res = fuzzy_cmeans(pts, FcmConfig(cluster_count=c, rng_seed=seed),
                               callback=lambda it, cen, u: rows.append(np.abs(u.sum(axis=1) - 1).max()))
        worst_row = max(worst_row, max(rows))
        rises += int(np.sum(np.diff(res.objective) > 0))
        if c == 1:
            assert np.abs(res.centers[0] - pts.mean(axis=0)).max() <= 1e-10
    _note(record_property, f"max row deviation {worst_row:.1e}, {rises} objective increases")
    assert worst_row <= 1e-9
    assert rises == 0


@pytest.mark.acceptance(5, "Welch t and Pearson r/p match high-precision fixtures within 1e-9; degenerate p = 0.5")
def test_statistics_oracles(record_property):
    worst = 0.0
    for ds in FIXTURES["datasets"]:
        w = one_tailed_ttest(ds["a"], ds["b"])
        r = pearson(ds["x"], ds["y"])
        worst = max(worst, abs(w.t_statistic - ds["welch"]["t"]), abs(w.p_value - ds["welch"]["p"]),
                    abs(r.r - ds["pearson"]["r"]), abs(r.p_value - ds["pearson"]["p"]))
    _note(record_property, f"{len(FIXTURES['datasets'])} datasets, max deviation {worst:.1e}")
    assert worst <= 1e-9
    assert one_tailed_ttest([4.0, 4.0, 4.0], [4.0, 4.0, 4.0]).p_value == 0.5


@pytest.fixture(scope="module")
def shifted_run(shifted_dataset, tmp_path_factory):
    start = time.perf_counter()
    out = tmp_path_factory.mktemp("shifted_out")
    report = run_pipeline(load_manifest(shifted_dataset.manifest_path, {"output_dir": str(out)}))
    return report, out, time.perf_counter() - start


@pytest.mark.acceptance(6, "synthetic end-to-end: injected group ranked first, duration p < 0.01, exact corruption count (< 60 s)")
def test_end_to_end_synthetic(shifted_dataset, shifted_run, record_property):
    report, _, elapsed = shifted_run
    (shift,) = shifted_dataset.truth["shifts"]
    top = report.kl.ranking("Suturing", shift["gesture"])[0].name
    p = report.duration_tests[shift["gesture"]].p_value
    found = sum(r.error_count for r in report.procedural)
    injected = shifted_dataset.truth["procedural_errors"]
    _note(record_property, f"top group {top}, p={p:.2e}, procedural {found}/{injected}, {elapsed:.1f} s")
    assert top == shift["group"]
    assert p < 0.01
    assert found == injected
    assert elapsed < 60


@pytest.mark.acceptance(7, "two runs of `run` give byte-identical report.json and CSVs")
def test_determinism(shifted_dataset, tmp_path, record_property):
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert cli.main(["run", "--manifest", str(shifted_dataset.manifest_path), "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.suffix in (".json", ".csv"))
    differing = [str(f) for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    _note(record_property, f"{len(files)} files compared, {len(differing)} differ")
    assert "report.json" in {str(f) for f in files}
    assert not differing


SUTURING_TABLE = {"G1": (8, 29), "G2": (22, 166), "G3": (82, 164), "G4": (71, 119),
                  "G5": (2, 37), "G6": (121, 163), "G8": (28, 48), "G9": (11, 24)}


@pytest.mark.acceptance(8, "JIGSAWS Suturing: per-gesture counts, r = 0.837 and r = 0.71 (conditional)")
def test_jigsaws_reproduction(tmp_path, record_property):
    manifest = os.environ.get("SURGERR_JIGSAWS_MANIFEST")
    if not manifest or not Path(manifest).is_file():
        pytest.skip("set SURGERR_JIGSAWS_MANIFEST to a Suturing manifest to run")
    report = run_pipeline(load_manifest(Path(manifest), {"output_dir": str(tmp_path / "out"), "task": "Suturing"}),
                          ("exec", "proc", "stats"))
    for gesture, (err, total) in SUTURING_TABLE.items():
        row = report.error_counts.row("Suturing", gesture)
        assert (row.erroneous, row.total) == (err, total), gesture
    assert sum(SUTURING_TABLE[g][0] for g in SUTURING_TABLE) == 345
    exec_r = report.trial_correlations["executional_errors_vs_duration"].r
    proc_r = report.trial_correlations["procedural_errors_vs_duration"].r
    _note(record_property, f"executional r={exec_r:.4f}, procedural r={proc_r:.4f}")
    assert abs(exec_r - 0.837) <= 0.005
    assert abs(proc_r - 0.71) <= 0.005
    shutil.rmtree(tmp_path / "out", ignore_errors=True)
