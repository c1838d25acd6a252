import csv
import json
import math

import numpy as np
import pytest

from megaroot.engine import RunConfig
from megaroot.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    FamilySpec,
    build_family,
    emit_report,
    log_histogram,
    preimage_oracle,
    random_dense_coefficients,
    random_disk_points,
    run_experiment,
)
from megaroot.poly import DensePoly, IteratedQuadratic, eval_iterated_quadratic


def test_build_family_chebyshev_roots():
    model, truth = build_family(FamilySpec("chebyshev", degree=4))
    assert model.degree == 4
    want = [math.cos(math.pi / 8), math.cos(3 * math.pi / 8), -math.cos(3 * math.pi / 8), -math.cos(math.pi / 8)]
    assert sorted(truth.real) == pytest.approx(sorted(want), abs=1e-15)
    assert np.all(truth.imag == 0)


def test_build_family_iterquad_degree():
    model, truth = build_family(FamilySpec("iterquad", level=3, c=1j))
    assert isinstance(model, IteratedQuadratic)
    assert model.degree == 8 and truth.size == 8


def test_build_family_known_roots_reproducible():
    model, truth = build_family(FamilySpec("known-roots", degree=100, seed=7))
    _, again = build_family(FamilySpec("known-roots", degree=100, seed=7))
    assert truth.size == 100 and np.array_equal(truth, again)
    assert np.all(np.abs(truth) <= 1.0)
    assert not np.array_equal(truth, random_disk_points(100, 8))


def test_random_roots_are_uniform_by_area():
    r = np.abs(random_disk_points(200_000, 1))
    # by area, P(|z| <= 1/2) = 1/4
    assert np.mean(r <= 0.5) == pytest.approx(0.25, abs=0.005)


def test_build_family_legendre_truth():
    model, truth = build_family(FamilySpec("legendre", degree=10))
    assert model.degree == 10
    assert truth.size == 10


@pytest.mark.parametrize(
    "spec",
    [
        FamilySpec("iterquad", level=0),
        FamilySpec("chebyshev", degree=0),
        FamilySpec("known-roots"),
        FamilySpec("dense-file"),
        FamilySpec("nonsense", degree=4),
    ],
)
def test_build_family_rejects_bad_parameters(spec):
    with pytest.raises(ConfigError):
        build_family(spec)


def test_dense_file_family(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("# z^2 - 1\n-1 0\n0 0\n1 0\n", encoding="utf-8")
    model, truth = build_family(FamilySpec("dense-file", path=str(path)))
    assert isinstance(model, DensePoly) and model.degree == 2 and truth is None


def test_preimage_oracle_examples():
    assert np.array_equal(preimage_oracle(0, 2), np.zeros(4))
    assert sorted(preimage_oracle(-1, 1).real) == [-1.0, 1.0]


def test_preimage_oracle_self_consistent_c_i_n10():
    pts = preimage_oracle(1j, 10)
    assert pts.size == 1024
    assert np.unique(np.round(pts, 12)).size == 1024
    q = IteratedQuadratic(1j, 10)
    worst = max(abs(eval_iterated_quadratic(q, z)[0].to_native()) for z in pts)
    assert worst <= 1e-10


def test_preimage_oracle_limits():
    with pytest.raises(ValueError):
        preimage_oracle(1j, 23)
    with pytest.raises(ValueError):
        preimage_oracle(1j, -1)


def test_log_histogram_bins():
    assert log_histogram(np.array([0, 1, 2, 3, 4, 7, 8])) == [(0, 1, 1), (1, 2, 1), (2, 4, 2), (4, 8, 2), (8, 16, 1)]
    assert log_histogram(np.array([5, 6])) == [(1, 2, 0), (2, 4, 0), (4, 8, 2)]
    assert log_histogram(np.array([], dtype=np.int64)) == []


def _cfg(family, points, **kw):
    return ExperimentConfig(family=family, grid_points=points, deterministic=True, verify=True, **kw)


def test_run_chebyshev_64():
    res = run_experiment(_cfg(FamilySpec("chebyshev", degree=64), 256))
    rep = res.report
    assert rep.distinct_roots == 64
    assert rep.match["matched"] == 64
    assert rep.match["spurious"] == []
    assert sum(rep.status_counts.values()) == rep.orbits_run == 256
    assert sum(n for _, _, n in rep.iteration_histogram) == 256


def test_run_iterquad_c_i_n6():
    res = run_experiment(_cfg(FamilySpec("iterquad", level=6, c=1j), 256))
    assert res.report.distinct_roots == 64
    assert res.match.matched == 64
    assert res.match.max_error <= 1e-8


def test_run_dense_random_32():
    res = run_experiment(_cfg(FamilySpec("dense-random", degree=32, seed=1), 128))
    assert res.report.distinct_roots == 32
    a = random_dense_coefficients(32, 1)
    z = res.roots.positions()
    k = np.arange(33)
    p = np.array([np.polyval(a[::-1], w) for w in z])
    # backward error: residual small against the size of the terms being summed
    scale = np.array([np.sum(np.abs(a) * np.abs(w) ** k) for w in z])
    assert np.all(np.abs(p) <= 1e-8 * scale)
    ref = np.roots(a[::-1])
    for w in z:
        assert np.min(np.abs(ref - w)) <= 1e-9 * max(1.0, abs(w))


def test_run_known_roots_well_separated():
    res = run_experiment(_cfg(FamilySpec("known-roots", degree=50, seed=4), 200))
    truth = res.true_roots
    gaps = np.abs(truth[:, None] - truth[None, :]) + np.eye(50)
    assert gaps.min() > 1e3 * res.roots.delta
    # every record is one true root; every true root with an orbit is found
    assert res.match.spurious == []
    assert res.match.matched == res.report.distinct_roots == 50
    assert res.match.unmatched == []


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("family", [
    FamilySpec("chebyshev", degree=128),
    FamilySpec("iterquad", level=7, c=1j),
    FamilySpec("iterquad", level=7, c=complex(-0.5, 0.3)),
    FamilySpec("iterquad", level=7, c=complex(0.3, -0.6)),
])
def test_completeness_small_degree(family, seed):
    fam = FamilySpec(family.family, degree=family.degree, level=family.level, c=family.c, seed=seed)
    cfg = _cfg(fam, 512, run=RunConfig(seed=seed))
    res = run_experiment(cfg)
    d = res.model.degree
    assert res.report.distinct_roots == d
    assert res.match.matched == d


def test_report_invariants_with_threads():
    cfg = ExperimentConfig(FamilySpec("chebyshev", degree=64), grid_points=256, threads=3, verify=True)
    rep = run_experiment(cfg).report
    assert sum(rep.status_counts.values()) == rep.orbits_run
    assert rep.distinct_roots <= rep.d
    assert rep.match["matched"] == 64


def test_reproducible_report(tmp_path):
    cfg = _cfg(FamilySpec("iterquad", level=6, c=1j), 256)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    emit_report(run_experiment(cfg).report, a, timing=False)
    emit_report(run_experiment(cfg).report, b, timing=False)
    assert a.read_bytes() == b.read_bytes()
    assert "wall_time" not in json.loads(a.read_text())


def test_json_round_trip(tmp_path):
    rep = run_experiment(_cfg(FamilySpec("chebyshev", degree=16), 64)).report
    path = tmp_path / "r.json"
    emit_report(rep, path)
    data = json.loads(path.read_text(encoding="utf-8"))
    assert set(data) == set(rep.to_dict())
    assert ExperimentReport.from_dict(data) == rep


def test_csv_two_rows(tmp_path):
    path = tmp_path / "r.csv"
    for d in (8, 16):
        emit_report(run_experiment(_cfg(FamilySpec("chebyshev", degree=d), 4 * d)).report, path, "csv")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3
    assert tuple(rows[0]) == CSV_COLUMNS
    row = dict(zip(rows[0], rows[2]))
    assert row["d"] == "16" and row["distinct_roots"] == "16"
    assert all(len(t.split(":")) == 3 for t in row["iteration_histogram"].split(";"))


def test_empty_experiment(tmp_path):
    rep = run_experiment(_cfg(FamilySpec("chebyshev", degree=8), 0)).report
    assert rep.orbits_run == 0 and rep.distinct_roots == 0
    assert rep.iterations_total == 0 and rep.iteration_histogram == []
    path = tmp_path / "e.json"
    emit_report(rep, path)
    assert json.loads(path.read_text())["orbits_run"] == 0


def test_emit_report_unknown_format(tmp_path):
    rep = run_experiment(_cfg(FamilySpec("chebyshev", degree=8), 0)).report
    with pytest.raises(ValueError):
        emit_report(rep, tmp_path / "x", "xml")


def test_bad_grid_is_config_error():
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig(FamilySpec("chebyshev", degree=8), radius_factor=0.5))
