import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairaudit.domain import Domain, HypothesisClass, Transcript, dump_class, load_class
from fairaudit.errors import DegenerateClass, EmptyVersionSpace, InvalidInput, ParseError, SizeLimit
from fairaudit.gaussian import LinearModel
from fairaudit.harness import (
    CountingOracle,
    ExperimentConfig,
    avg_error,
    disagreement_coefficient,
    gen_local_class,
    gen_random_class,
    gen_shattered,
    gen_threshold_class,
    ingest_csv,
    mp_diameter,
    run_experiment,
    synthetic_dataset,
)
from fairaudit.harness import experiment as exp_mod
from fairaudit.harness.generators import _dedup
from fairaudit.minimax import cost
from instances import diam_pairs, filter_consistent, random_instance

# -- oracles -----------------------------------------------------------------


def test_counting_oracle_counts_distinct():
    o = CountingOracle([1, -1, 1])
    assert [o.query(x) for x in (0, 1, 0, 2, 1)] == [1, -1, 1, 1, -1]
    assert o.count == 3
    assert o.transcript == [(0, 1), (1, -1), (2, 1)]
    assert o.replay()
    assert not o.replay([1, 1, 1])
    with pytest.raises(InvalidInput):
        o.query(3)
    with pytest.raises(InvalidInput):
        CountingOracle([1, 0])


def test_counting_oracle_linear():
    o = CountingOracle(LinearModel([1.0, -1.0], 0.5))
    assert o.query([0.0, 0.0]) == 1
    assert o.query(np.zeros(2)) == 1
    assert o.query([0.0, 1.0]) == -1
    assert o.count == 2 and o.d == 2 and o.m is None
    with pytest.raises(InvalidInput):
        o.query([1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 9), max_size=40))
def test_counting_oracle_property(qs):
    o = CountingOracle(np.where(np.arange(10) % 3 == 0, 1, -1))
    for x in qs:
        o.query(x)
    assert o.count == len(set(qs))
    assert o.replay()


# -- evaluators --------------------------------------------------------------


def test_mp_diameter_examples():
    C, star = gen_shattered(4)
    full = Transcript(tuple((x, int(C.labels[star][x])) for x in range(C.m)))
    assert mp_diameter(C, full) == 0.0
    assert mp_diameter(C, Transcript(((1, -1), (2, -1)))) == 0.5
    with pytest.raises(EmptyVersionSpace):
        mp_diameter(C, Transcript(((0, 1),)))


def test_avg_error_examples():
    D = Domain.from_groups([1, 0], [1.0, 1.0], 0.5)
    C = HypothesisClass([[1, -1], [-1, -1]], D)
    assert C.mus.tolist() == [1.0, 0.0]
    assert avg_error(C, Transcript(), 0.0) == 0.5
    assert avg_error(C, Transcript(((0, -1),)), 0.0) == 0.0


def test_avg_error_monte_carlo():
    C = random_instance(17, max_h=32)
    T = [(0, int(C.labels[0][0]))]
    members = filter_consistent(C, T)
    rng = np.random.default_rng(0)
    draws = np.abs(C.mus[rng.choice(members, size=10**5)] - C.mus[0])
    se = draws.std() / np.sqrt(len(draws))
    assert abs(avg_error(C, T, C.mus[0]) - draws.mean()) <= 3 * se + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.data())
def test_mp_diameter_matches_pair_scan(seed, data):
    C = random_instance(seed)
    t = data.draw(st.integers(0, len(C) - 1))
    xs = data.draw(st.lists(st.integers(0, C.m - 1), unique=True, max_size=C.m))
    T = [(x, int(C.labels[t][x])) for x in xs]
    assert abs(mp_diameter(C, T) - diam_pairs(C, filter_consistent(C, T))) <= 1e-12


def test_disagreement_coefficient_examples():
    D = Domain.from_groups([1, 1, 0], [0.5, 0.5, 1.0], 0.5)
    single = HypothesisClass([[1, 1, 1]], D)
    assert disagreement_coefficient(single, 0.1) == 0.0
    # two hypotheses differing on example 0, marginal mass q = 0.25
    pair = HypothesisClass([[1, 1, 1], [-1, 1, 1]], D)
    q = 0.25
    assert disagreement_coefficient(pair, 0.1) == pytest.approx(1.0)
    assert disagreement_coefficient(pair, q) == pytest.approx(1.0)
    # above q the ball always holds both, so the ratio is q / r
    assert disagreement_coefficient(pair, 0.5) == pytest.approx(q / 0.5)
    with pytest.raises(InvalidInput):
        disagreement_coefficient(pair, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_disagreement_coefficient_monotone(seed, r1, r2):
    C = random_instance(seed, max_h=16, max_m=8)
    lo, hi = sorted((r1, r2))
    assert disagreement_coefficient(C, hi) <= disagreement_coefficient(C, lo) + 1e-12


# -- generators --------------------------------------------------------------


def test_gen_shattered():
    C, star = gen_shattered(4)
    assert len(C) == 16
    assert sorted(set(np.round(C.mus, 12))) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert C.mus[star] == 0.0 and np.all(C.labels[star] == -1)
    assert len(gen_shattered(2)[0]) == 4
    assert C.domain.pi1 == 0.5 and C.domain.p0[0] == 1.0
    with pytest.raises(SizeLimit):
        gen_shattered(17)


def test_random_class_reproducible_and_distinct():
    a = gen_random_class(12, 40, 5)
    b = gen_random_class(12, 40, 5)
    assert np.array_equal(a.labels, b.labels) and a.domain == b.domain
    L = a.labels
    for i in range(len(L)):
        for j in range(i + 1, len(L)):
            assert np.any(L[i] != L[j])


def test_threshold_class():
    data = synthetic_dataset(60, 3, 1)
    C = gen_threshold_class(data, 50, 2)
    C2 = gen_threshold_class(data, 50, 2)
    assert np.array_equal(C.labels, C2.labels)
    assert len(np.unique(C.labels, axis=0)) == len(C)


def test_degenerate_class():
    with pytest.raises(DegenerateClass):
        _dedup(np.array([[1, -1, 1], [1, -1, 1]], dtype=np.int8))
    # two groups sharing one feature point: every hyperplane labels both alike
    D = Domain.from_groups([0, 1], [1.0, 1.0], 0.5)
    X = np.zeros((2, 2))
    seen_degenerate = False
    for seed in range(20):
        try:
            gen_threshold_class((D, X), 2, seed)
        except DegenerateClass:
            seen_degenerate = True
    assert seen_degenerate


def test_local_class():
    C = gen_local_class(10, 2, 0)
    assert len(C) == 1 + 10 + 45
    assert all(np.sum(C.labels[i] != C.labels[0]) <= 2 for i in range(len(C)))


def test_ingest_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("g,f1,f2\n1,0.5,1\n1,0.1,2\n0,3,4\n0,-1,0\n")
    D, X = ingest_csv(p, "g", ["f1", "f2"])
    assert D.pi1 == 0.5
    assert np.allclose(D.p1[:2], 0.5) and np.allclose(D.p0[2:], 0.5)
    assert X.shape == (4, 2) and X[3, 0] == -1.0


def test_ingest_csv_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("g,f1\n1,0.5\n0,\n")
    with pytest.raises(ParseError, match="row 3"):
        ingest_csv(p, "g", ["f1"])
    p.write_text("g,f1\n1,0.5\n2,1\n")
    with pytest.raises(ParseError, match="row 3"):
        ingest_csv(p, "g", ["f1"])
    p.write_text("g,f1\n1,0.5\n1,abc\n")
    with pytest.raises(ParseError, match="row 3"):
        ingest_csv(p, "g", ["f1"])
    p.write_text("g,f1\n1,0.5\n1,1\n")
    with pytest.raises(InvalidInput):
        ingest_csv(p, "g", ["f1"])
    with pytest.raises(ParseError):
        ingest_csv(p, "group", ["f1"])


def test_ingest_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    p = tmp_path / "d.csv"
    groups = rng.integers(0, 2, size=37)
    groups[:2] = (0, 1)
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "grp"])
        for g in groups:
            w.writerow([rng.normal(), g])
    D, X = ingest_csv(p, "grp", ["x"])
    C = gen_threshold_class((D, X), 10, 0)
    out = tmp_path / "c.json"
    dump_class(C, out)
    D2 = load_class(out).domain
    assert np.abs(D2.p0 - D.p0).max() <= 1e-12 and np.abs(D2.p1 - D.p1).max() <= 1e-12
    assert abs(D2.pi1 - D.pi1) <= 1e-12


# -- experiment runner ---------------------------------------------------------


def small_cfg(tmp_path, **kw):
    base = dict(
        class_source={"kind": "random", "m": 12, "k": 40, "seed": 3},
        methods=["oracle", "cal", "iid", "minimax"],
        budgets=[2, 5, 40],
        repeats=3,
        eps=0.1,
        seed=11,
        output=str(tmp_path / "rows.csv"),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation(tmp_path):
    with pytest.raises(InvalidInput):
        small_cfg(tmp_path, budgets=[5, 5])
    with pytest.raises(InvalidInput):
        small_cfg(tmp_path, repeats=0)
    with pytest.raises(InvalidInput):
        small_cfg(tmp_path, methods=["bogus"])
    with pytest.raises(InvalidInput):
        ExperimentConfig.from_dict({"class_source": "x.json", "budget": [1]})
    cfg = small_cfg(tmp_path)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_experiment_csv_and_reproducible(tmp_path):
    cfg = small_cfg(tmp_path)
    res = run_experiment(cfg)
    body = (tmp_path / "rows.csv").read_text()
    summary = (tmp_path / "rows_summary.csv").read_text()
    header = body.splitlines()[0]
    assert header == "method,budget,seed,queries,estimate,true_mu,abs_error,diameter,avg_error,error"
    assert len(body.splitlines()) == 1 + 4 * 3 * 3
    run_experiment(cfg)
    assert (tmp_path / "rows.csv").read_text() == body
    assert (tmp_path / "rows_summary.csv").read_text() == summary
    # full budget: minimax and oracle certify
    for r in res.rows:
        assert r["queries"] <= r["budget"]
        if r["budget"] == 40 and r["method"] in ("minimax", "oracle"):
            assert r["diameter"] <= 2 * cfg.eps + 1e-12


def test_experiment_workers_match_serial(tmp_path):
    cfg = small_cfg(tmp_path)
    serial = run_experiment(cfg).rows_csv()
    assert run_experiment(cfg, workers=2).rows_csv() == serial


def test_experiment_nested_diameters(tmp_path):
    cfg = small_cfg(tmp_path, budgets=[1, 2, 3, 4, 6, 8, 12], output=None, methods=["oracle", "cal", "minimax"])
    res = run_experiment(cfg)
    for method in cfg.methods:
        for seed in {r["seed"] for r in res.rows}:
            diams = [r["diameter"] for r in res.rows if r["method"] == method and r["seed"] == seed]
            assert all(b <= a + 1e-12 for a, b in zip(diams, diams[1:]))


def test_experiment_shattered_separation(tmp_path):
    cfg = ExperimentConfig(
        class_source={"kind": "shattered", "n": 8},
        methods=["iid", "oracle", "minimax"],
        budgets=[4, 8],
        repeats=5,
        eps=0.25,
        seed=0,
    )
    res = run_experiment(cfg)
    C, _ = gen_shattered(8)
    need = cost(C.full(), 0.25, C)
    assert need == 4
    for r in res.rows:
        if r["method"] == "iid" and r["budget"] == 4:
            assert r["diameter"] >= 0.5
        if r["method"] == "minimax":
            assert r["diameter"] <= 0.5
        if r["method"] == "oracle" and r["budget"] >= 8:
            assert r["diameter"] <= 0.5


def test_experiment_records_errors(tmp_path, monkeypatch):
    real = exp_mod.run_method

    def flaky(method, *a, **kw):
        if method == "cal":
            raise DegenerateClass("boom")
        return real(method, *a, **kw)

    monkeypatch.setattr(exp_mod, "run_method", flaky)
    res = run_experiment(small_cfg(tmp_path, methods=["cal", "iid"]))
    cal = [r for r in res.rows if r["method"] == "cal"]
    assert all(r["error"].startswith("DegenerateClass") for r in cal)
    assert all(not r["error"] for r in res.rows if r["method"] == "iid")
    s = [r for r in res.summary if r["method"] == "cal"]
    assert all(r["n"] == 0 and r["errors"] == 3 for r in s)


def test_experiment_class_file_source(tmp_path):
    C = random_instance(4)
    path = tmp_path / "c.json"
    dump_class(C, path)
    cfg = ExperimentConfig(str(path), methods=["oracle"], budgets=[3], repeats=2, eps=0.1, target=1)
    res = run_experiment(cfg)
    assert res.target == 1 and res.true_mu == C.mus[1]
    with pytest.raises(InvalidInput):
        run_experiment(ExperimentConfig(str(path), methods=["oracle"], budgets=[3], repeats=1, target=999))


def test_config_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"class_source": {"kind": "shattered", "n": 3}, "budgets": [1, 2], "repeats": 1}))
    cfg = ExperimentConfig.from_json(p)
    assert cfg.budgets == [1, 2]
    p.write_text("{\n  bad")
    with pytest.raises(InvalidInput, match="line 2"):
        ExperimentConfig.from_json(p)
