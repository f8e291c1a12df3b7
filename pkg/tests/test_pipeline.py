import sys
import textwrap
import time

import numpy as np
import pytest

from conftest import POISSON_BOX, POISSON_CFG
from morpipe.activesubspace import BoxDomain
from morpipe.errors import ArgumentError, ConfigError, OptimizationError, PipelineError
from morpipe.pipeline import (
    BuiltinAdapter,
    ExternalAdapter,
    PODIObjective,
    SamplingPlan,
    adapter_from_dict,
    compass_search,
    enrich,
    grid_search,
    resolve_jobs,
    run_offline,
    sample,
    stratum_width,
)
from morpipe.podi import PODIModel, db_load, db_save
from morpipe.testbeds import PoissonConfig, poisson_solve, qoi_weights

SMALL_CFG = PoissonConfig(g=16, width=0.25)

SOLVER = textwrap.dedent(
    """
    import sys
    a, b = (float(v) for v in open(sys.argv[1]).read().split(","))
    if a > {threshold}:
        sys.exit("refusing a = %g" % a)
    out = [a + b, a * b, a - b]
    open("output.csv", "w").write(",".join(repr(v) for v in out) + "\\n")
    open("qoi.txt", "w").write(repr(a + 2 * b) + "\\n")
    """
)


def external(tmp_path, threshold=10.0):
    script = tmp_path / "solver.py"
    script.write_text(SOLVER.format(threshold=threshold))
    return ExternalAdapter(f"{sys.executable} {script} {{params}}", timeout=30)


# sampling


def test_lhs_one_per_quartile():
    plan = SamplingPlan(BoxDomain([2.0], [6.0]), 4, "lhs", seed=3)
    x = sample(plan)[:, 0]
    assert sorted(np.floor(x - 2.0).astype(int).tolist()) == [0, 1, 2, 3]


@pytest.mark.parametrize("method", ["lhs", "uniform"])
def test_samples_inside_and_deterministic(method):
    plan = SamplingPlan(BoxDomain([-1, 0, 10], [1, 0.5, 20]), 50, method, seed=123)
    X = sample(plan)
    assert X.shape == (50, 3)
    assert np.all(X >= plan.box.lower) and np.all(X <= plan.box.upper)
    assert np.array_equal(X, sample(plan))
    assert not np.array_equal(X, sample(SamplingPlan(plan.box, 50, method, seed=124)))


def test_lhs_marginal_coverage():
    plan = SamplingPlan(BoxDomain([0, -3], [1, 3]), 37, "lhs", seed=0)
    X = sample(plan)
    strata = np.floor((X - plan.box.lower) / stratum_width(plan)).astype(int)
    for d in range(2):
        assert sorted(strata[:, d]) == list(range(37))


def test_plan_validation():
    with pytest.raises(ArgumentError):
        SamplingPlan(POISSON_BOX, 0)
    with pytest.raises(ArgumentError):
        SamplingPlan(POISSON_BOX, 5, "sobol")


# offline


def test_builtin_offline_shape():
    db = run_offline(SamplingPlan(POISSON_BOX, 5, seed=1), BuiltinAdapter("poisson", SMALL_CFG), jobs=2)
    assert (db.k, db.n, db.p) == (5, 16 * 16, 2)
    assert db.qoi is not None
    field, qoi = poisson_solve(SMALL_CFG, db.params[3])
    np.testing.assert_array_equal(db.snapshots[:, 3], field)
    assert db.qoi[3] == qoi
    assert db.provenance["failures"] == []


def test_offline_deterministic_across_jobs():
    plan = SamplingPlan(POISSON_BOX, 6, seed=2)
    ad = BuiltinAdapter("poisson", SMALL_CFG)
    a = run_offline(plan, ad, jobs=1)
    b = run_offline(plan, ad, jobs=4)
    assert np.array_equal(a.params, b.params)
    assert np.array_equal(a.snapshots, b.snapshots)
    assert a.manifest() == b.manifest()


def test_external_adapter_with_one_failure(tmp_path):
    plan = SamplingPlan(BoxDomain([0, 0], [1, 1]), 6, "lhs", seed=5)
    pts = sample(plan)
    # fail exactly the sample with the largest first coordinate
    threshold = np.sort(pts[:, 0])[-2]
    db = run_offline(plan, external(tmp_path, threshold), jobs=3, workdir=tmp_path / "work")
    assert db.k == 5
    failures = db.manifest()["provenance"]["failures"]
    assert len(failures) == 1
    assert failures[0]["index"] == int(np.argmax(pts[:, 0]))
    assert "refusing" in failures[0]["error"]
    keep = np.delete(np.arange(6), failures[0]["index"])
    np.testing.assert_array_equal(db.params, pts[keep])
    a, b = pts[keep, 0], pts[keep, 1]
    np.testing.assert_allclose(db.snapshots, np.vstack([a + b, a * b, a - b]), rtol=1e-15)
    np.testing.assert_allclose(db.qoi, a + 2 * b, rtol=1e-15)
    assert sorted(p.name for p in (tmp_path / "work").iterdir()) == [f"sample_{i:05d}" for i in range(6)]
    db_save(db, tmp_path / "db")
    assert len(db_load(tmp_path / "db").provenance["failures"]) == 1


def test_external_all_fail(tmp_path):
    plan = SamplingPlan(BoxDomain([0, 0], [1, 1]), 3, seed=0)
    with pytest.raises(PipelineError, match="all 3"):
        run_offline(plan, external(tmp_path, threshold=-1.0), jobs=1, workdir=tmp_path / "w")


def test_external_requires_placeholder():
    with pytest.raises(ConfigError):
        ExternalAdapter("solver --in params.csv")


def test_adapter_from_dict(tmp_path):
    ad = adapter_from_dict({"kind": "builtin", "config": {"g": 20}})
    assert isinstance(ad, BuiltinAdapter) and ad.config.g == 20
    ext = adapter_from_dict({"kind": "external", "command": "x {params}", "workdir": "w"}, tmp_path)
    assert ext.workdir == str(tmp_path / "w")
    with pytest.raises(ConfigError):
        adapter_from_dict({"kind": "cloud"})


def test_resolve_jobs(monkeypatch):
    monkeypatch.delenv("MORPIPE_JOBS", raising=False)
    assert resolve_jobs(3) == 3
    assert resolve_jobs() >= 1
    monkeypatch.setenv("MORPIPE_JOBS", "5")
    assert resolve_jobs(3) == 5
    assert resolve_jobs(3, explicit=2) == 2
    monkeypatch.setenv("MORPIPE_JOBS", "many")
    with pytest.raises(ConfigError):
        resolve_jobs()


# enrichment


@pytest.fixture(scope="module")
def small_db():
    return run_offline(SamplingPlan(POISSON_BOX, 5, seed=4), BuiltinAdapter("poisson", SMALL_CFG), jobs=1)


def test_enrich_nothing_new(small_db):
    assert enrich(small_db, np.zeros((0, 2)), BuiltinAdapter("poisson", SMALL_CFG)) is small_db


def test_enrich_adds_points(small_db):
    ad = BuiltinAdapter("poisson", SMALL_CFG)
    new = enrich(small_db, SamplingPlan(POISSON_BOX, 3, seed=99), ad, jobs=2)
    assert new.k == 8
    assert np.array_equal(new.snapshots[:, :5], small_db.snapshots)
    assert np.array_equal(new.params[:5], small_db.params)
    assert new.qoi.size == 8
    assert small_db.k == 5


def test_enrich_skips_duplicates(small_db):
    ad = BuiltinAdapter("poisson", SMALL_CFG)
    pts = np.vstack([small_db.params[1], [0.5, 0.5], [0.5, 0.5]])
    with pytest.warns(UserWarning, match="duplicate"):
        new = enrich(small_db, pts, ad)
    assert new.k == 6


def test_enrich_improves_nearby_accuracy(poisson_db20, poisson_adapter):
    target = np.array([0.36, 0.66])
    truth = poisson_solve(POISSON_CFG, target)[0]

    def err(db):
        pred = PODIModel(db, "full")(target)
        return np.linalg.norm(pred - truth) / np.linalg.norm(truth)

    near = target + np.array([[0.03, 0.0], [0.0, -0.03], [-0.03, 0.03]])
    after = enrich(poisson_db20, near, poisson_adapter, jobs=1)
    assert err(after) <= err(poisson_db20)


# optimization


def test_compass_quadratic():
    box = BoxDomain([-1, -2, 0], [1, 2, 3])
    c = np.array([0.3, -1.1, 2.2])
    rep = compass_search(lambda mu: float(np.sum((mu - c) ** 2)), box, seed=1, budget=5000)
    assert np.max(np.abs(rep.best_mu - c)) <= 1e-4
    assert rep.converged
    assert len(rep.history) <= rep.evaluations <= 5000


def test_compass_budget_one():
    rep = compass_search(lambda mu: 0.0, POISSON_BOX, budget=1)
    assert len(rep.history) == 1
    assert rep.history_table().shape == (1, 5)


def test_compass_running_best_monotone():
    box = BoxDomain([-2, -2], [2, 2])
    rosen = lambda x: float((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)
    rep = compass_search(rosen, box, seed=4, budget=800, restarts=2)
    for s in (0, 1):
        vals = [v for _, start, _, v in rep.history if start == s]
        running = np.minimum.accumulate(vals)
        assert np.all(np.diff(running) <= 0)
    assert rep.best_value == min(v for *_, v in rep.history)


def test_compass_maximize_and_deterministic():
    box = BoxDomain([0, 0], [1, 1])
    f = lambda x: float(-np.sum((x - 0.7) ** 2))
    a = compass_search(f, box, seed=9, budget=600, direction="max")
    b = compass_search(f, box, seed=9, budget=600, direction="max")
    np.testing.assert_allclose(a.best_mu, [0.7, 0.7], atol=1e-4)
    assert a.to_dict() == b.to_dict()
    assert np.array_equal(a.history_table(), b.history_table())
    assert a.best_value == max(v for *_, v in a.history)


def test_compass_skips_failures():
    def flaky(x):
        if x[0] > 0.6:
            raise RuntimeError("diverged")
        return float(np.sum((x - 0.5) ** 2))

    rep = compass_search(flaky, BoxDomain([0, 0], [1, 1]), seed=0, budget=1000)
    np.testing.assert_allclose(rep.best_mu, [0.5, 0.5], atol=1e-4)
    # polling at 0.5 + 0.25 must hit the failing region
    assert rep.failures > 0
    assert rep.failures + len(rep.history) == rep.evaluations

    def broken(x):
        raise RuntimeError("always")

    with pytest.raises(OptimizationError):
        compass_search(broken, POISSON_BOX, budget=20)


def test_compass_argument_errors():
    with pytest.raises(ArgumentError):
        compass_search(lambda x: 0.0, POISSON_BOX, budget=0)
    with pytest.raises(ArgumentError):
        compass_search(lambda x: 0.0, POISSON_BOX, direction="up")


def test_poisson_surrogate_matches_grid(poisson_db40):
    db, plan = poisson_db40
    t = time.perf_counter()
    model = PODIModel(db, "full")
    obj = PODIObjective(model, qoi_weights(POISSON_CFG))
    rep = compass_search(obj, db.box, seed=3, budget=2000, restarts=4, direction="max")
    grid_mu, grid_val = grid_search(obj, db.box, 41, direction="max")
    assert np.all(np.abs(rep.best_mu - grid_mu) <= stratum_width(plan))
    assert rep.best_value >= grid_val - 1e-12 * abs(grid_val)
    assert time.perf_counter() - t < 30
    # surrogate agrees with stored QoI at the nodes
    for j in range(0, db.k, 7):
        assert abs(obj(db.params[j]) - db.qoi[j]) <= 1e-10 * abs(db.qoi[j])
