"""Offline database construction and surrogate-driven optimization.

The full-order model is reached through a solver adapter: either a
built-in testbed or an external command that follows a file protocol:

1. ``params.csv`` (one row) is written into a fresh per-sample directory;
2. the command template, with ``{params}`` replaced by that file's path,
   is executed with the sample directory as working directory;
3. ``output.csv`` (first row = flattened snapshot) and optionally
   ``qoi.txt`` are read back from the sample directory.
"""

import logging
import os
import shlex
import shutil
import subprocess
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, testbeds
from .activesubspace import BoxDomain, normalize, project
from .errors import ArgumentError, ConfigError, OptimizationError, PipelineError
from .matrixio import read_matrix, write_matrix
from .podi import SnapshotDatabase

log = logging.getLogger(__name__)

PLACEHOLDER = "{params}"
JOBS_ENV = "MORPIPE_JOBS"


@dataclass(frozen=True)
class SamplingPlan:
    box: BoxDomain
    count: int
    method: str = "lhs"
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ArgumentError("sampling count must be >= 1")
        if self.method not in ("uniform", "lhs"):
            raise ArgumentError(f"sampling method must be 'uniform' or 'lhs', got {self.method!r}")


def sample(plan):
    """Parameter matrix of shape ``(count, p)`` inside ``plan.box``.

    ``lhs`` places exactly one point in each of the ``count`` equal strata of
    every dimension, strata being matched across dimensions by independent
    permutations.
    """
    rng = np.random.default_rng(plan.seed)
    N, p = plan.count, plan.box.dim
    if plan.method == "uniform":
        unit = rng.uniform(size=(N, p))
    else:
        unit = np.empty((N, p))
        for d in range(p):
            unit[:, d] = (rng.permutation(N) + rng.uniform(size=N)) / N
    return plan.box.lower + unit * plan.box.width


def stratum_width(plan):
    return plan.box.width / plan.count


# -- solver adapters ---------------------------------------------------------


@dataclass(frozen=True)
class BuiltinAdapter:
    """Evaluate a built-in testbed; currently the Poisson problem."""

    testbed: str = "poisson"
    config: testbeds.PoissonConfig = field(default_factory=testbeds.PoissonConfig)

    def __post_init__(self):
        if self.testbed != "poisson":
            raise ConfigError(f"adapter.testbed: unknown testbed {self.testbed!r}")

    def evaluate(self, mu, workdir=None):
        return testbeds.poisson_solve(self.config, mu)

    def qoi_weights(self):
        return testbeds.qoi_weights(self.config)

    def describe(self):
        return {"kind": "builtin", "testbed": self.testbed, "config": self.config.to_dict()}


@dataclass(frozen=True)
class ExternalAdapter:
    command: str
    workdir: str = None
    timeout: float = 600.0

    def __post_init__(self):
        if PLACEHOLDER not in self.command:
            raise ConfigError(f"adapter.command: template must contain {PLACEHOLDER!r}")

    def argv(self, params_path):
        return [tok.replace(PLACEHOLDER, str(params_path)) for tok in shlex.split(self.command)]

    def evaluate(self, mu, workdir):
        workdir = Path(workdir)
        if workdir.exists():
            shutil.rmtree(workdir)
        workdir.mkdir(parents=True)
        params_path = workdir / "params.csv"
        write_matrix(params_path, np.asarray(mu, dtype=float)[None, :])
        proc = subprocess.run(
            self.argv(params_path.resolve()),
            cwd=workdir,
            capture_output=True,
            text=True,
            timeout=self.timeout,
        )
        if proc.returncode != 0:
            tail = (proc.stderr or "").strip().splitlines()[-1:] or [""]
            raise RuntimeError(f"command exited with status {proc.returncode}: {tail[0]}")
        out = workdir / "output.csv"
        if not out.is_file():
            raise RuntimeError("solver did not write output.csv")
        snapshot = read_matrix(out)
        if snapshot.size == 0:
            raise RuntimeError("output.csv is empty")
        qoi = None
        qpath = workdir / "qoi.txt"
        if qpath.is_file():
            qoi = float(qpath.read_text().split()[0])
        return snapshot[0], qoi

    def describe(self):
        return {"kind": "external", "command": self.command, "timeout": self.timeout}


def adapter_from_dict(doc, base_dir="."):
    doc = dict(doc)
    kind = doc.pop("kind", "builtin")
    if kind == "builtin":
        cfg = testbeds.PoissonConfig.from_dict(doc.get("config", {}))
        return BuiltinAdapter(doc.get("testbed", "poisson"), cfg)
    if kind == "external":
        if "command" not in doc:
            raise ConfigError("adapter.command: required for external adapters")
        wd = doc.get("workdir")
        if wd is not None:
            wd = str(Path(base_dir, wd))
        return ExternalAdapter(doc["command"], wd, float(doc.get("timeout", 600.0)))
    raise ConfigError(f"adapter.kind: expected 'builtin' or 'external', got {kind!r}")


def resolve_jobs(configured=None, explicit=None):
    """Worker count.

    Precedence: ``explicit`` (command-line flag), then ``MORPIPE_JOBS``, then
    ``configured`` (config file), then the number of processors.
    """
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    if configured is None:
        configured = os.cpu_count() or 1
    return max(1, int(configured))


def _evaluate_all(points, adapter, jobs, workdir, offset=0, progress=None):
    root = Path(workdir) if workdir else None
    tmp = None
    if isinstance(adapter, ExternalAdapter) and root is None:
        root = Path(adapter.workdir) if adapter.workdir else None
        if root is None:
            tmp = tempfile.TemporaryDirectory(prefix="morpipe-")
            root = Path(tmp.name)

    def run(i):
        sample_dir = None if root is None else root / f"sample_{offset + i:05d}"
        try:
            snap, qoi = adapter.evaluate(points[i], sample_dir)
            return i, np.asarray(snap, dtype=float).reshape(-1), qoi, None
        except Exception as exc:  # noqa: BLE001 - any solver failure is recorded
            return i, None, None, f"{type(exc).__name__}: {exc}"

    try:
        results = [None] * len(points)
        with ThreadPoolExecutor(max_workers=jobs or resolve_jobs()) as pool:
            for done, res in enumerate(pool.map(run, range(len(points))), start=1):
                results[res[0]] = res
                if progress:
                    progress("evaluate", done, len(points))
    finally:
        if tmp is not None:
            tmp.cleanup()
    return results


def _assemble(points, results, offset=0):
    ok = [r for r in results if r[3] is None]
    failures = [
        {"index": offset + r[0], "params": points[r[0]].tolist(), "error": r[3]}
        for r in results
        if r[3] is not None
    ]
    sizes = {r[1].size for r in ok}
    if len(sizes) > 1:
        raise PipelineError(f"solver returned snapshots of differing lengths {sorted(sizes)}")
    return ok, failures


def run_offline(plan, adapter, jobs=None, workdir=None, names=None, progress=None):
    """Sample ``plan`` and evaluate the full-order model at every point.

    Failed evaluations are excluded from the database and listed under
    ``provenance["failures"]``.

    Raises
    ------
    PipelineError
        If no evaluation succeeded.
    """
    points = sample(plan)
    results = _evaluate_all(points, adapter, jobs, workdir, progress=progress)
    ok, failures = _assemble(points, results)
    if failures:
        log.warning("%d of %d evaluations failed", len(failures), len(points))
    if not ok:
        raise PipelineError(f"all {len(points)} evaluations failed; first error: {failures[0]['error']}")
    qoi = None
    if all(r[2] is not None for r in ok):
        qoi = np.array([r[2] for r in ok], dtype=float)
    prov = {
        "created": f"morpipe {__version__} run_offline",
        "adapter": adapter.describe(),
        "sampling": {"method": plan.method, "count": plan.count, "seed": plan.seed},
        "failures": failures,
    }
    return SnapshotDatabase(
        points[[r[0] for r in ok]],
        np.column_stack([r[1] for r in ok]),
        qoi,
        names,
        plan.box,
        prov,
    )


def enrich(db, points, adapter, jobs=None, workdir=None, progress=None):
    """Evaluate additional parameter points and append them to ``db``.

    ``points`` is a ``(q, p)`` array or a :class:`SamplingPlan`.  Points
    already present (exact equality) are skipped with a warning.  The
    existing columns are carried over unchanged.
    """
    if isinstance(points, SamplingPlan):
        points = sample(points)
    points = np.asarray(points, dtype=float).reshape(-1, db.p)
    fresh = []
    for mu in points:
        if db.contains(mu) or any(np.array_equal(mu, f) for f in fresh):
            warnings.warn(f"skipping duplicate parameter {mu.tolist()}", stacklevel=2)
        else:
            fresh.append(mu)
    if not fresh:
        return db
    fresh = np.array(fresh)
    results = _evaluate_all(fresh, adapter, jobs, workdir, offset=db.k, progress=progress)
    ok, failures = _assemble(fresh, results, offset=db.k)
    if not ok:
        raise PipelineError(f"all {len(fresh)} enrichment evaluations failed")
    new_snaps = np.column_stack([r[1] for r in ok])
    if new_snaps.shape[0] != db.n:
        raise PipelineError(f"new snapshots have {new_snaps.shape[0]} entries, database has {db.n}")
    qoi = None
    if db.qoi is not None and all(r[2] is not None for r in ok):
        qoi = np.concatenate([db.qoi, [r[2] for r in ok]])
    prov = dict(db.provenance)
    prov["failures"] = list(prov.get("failures", [])) + failures
    prov["enrichments"] = int(prov.get("enrichments", 0)) + 1
    return SnapshotDatabase(
        np.vstack([db.params, fresh[[r[0] for r in ok]]]),
        np.hstack([db.snapshots, new_snaps]),
        qoi,
        db.names,
        db.box,
        prov,
    )


# -- objectives ----------------------------------------------------------------


class PODIObjective:
    """Linear functional ``weights . podi(mu)`` of the PODI field prediction."""

    def __init__(self, model, weights):
        self.model = model
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.size != model.db.n:
            raise ArgumentError("functional weights must match the snapshot length")
        # weights @ U c(mu) == (weights @ U) @ c(mu); precompute the row
        self._row = self.weights @ model.basis.modes

    def __call__(self, mu):
        return float(self._row @ self.model.coefficients_at(mu))


class ActiveSubspaceObjective:
    """``g(W1^T normalize(mu))`` for a fitted ridge surrogate."""

    def __init__(self, result, surrogate, box):
        self.result, self.surrogate, self.box = result, surrogate, box

    def __call__(self, mu):
        return float(self.surrogate(project(normalize(mu, self.box), self.result)))


# -- optimizer -----------------------------------------------------------------


@dataclass
class OptimizationReport:
    best_mu: np.ndarray
    best_value: float
    history: list
    evaluations: int
    converged: bool
    direction: str = "min"
    failures: int = 0

    def to_dict(self):
        return {
            "best_mu": [float(v) for v in self.best_mu],
            "best_value": float(self.best_value),
            "evaluations": self.evaluations,
            "converged": self.converged,
            "direction": self.direction,
            "failures": self.failures,
            "history_length": len(self.history),
        }

    def history_table(self):
        """Rows ``(iteration, start, mu..., value)``."""
        return np.array(
            [[it, start, *mu, val] for it, start, mu, val in self.history], dtype=float
        )


def compass_search(objective, box, seed=0, budget=1000, restarts=4,
                   direction="min", initial_step=0.25, min_step=1e-6):
    """Multi-start compass (coordinate pattern) search inside ``box``.

    From each seeded start the ``2p`` points ``x +- step_i e_i`` are polled;
    the best strictly improving one is accepted, otherwise the step halves.
    A start ends when the relative step drops below ``min_step`` or its
    share of ``budget`` is spent.  Every objective evaluation counts against
    the budget, including failed ones, which are otherwise skipped.

    Returns
    -------
    OptimizationReport
        ``history`` holds ``(iteration, start, mu, value)`` for every
        successful evaluation, with values in the caller's sign convention.
    """
    if budget < 1:
        raise ArgumentError("budget must be >= 1")
    if restarts < 1:
        raise ArgumentError("restarts must be >= 1")
    if direction not in ("min", "max"):
        raise ArgumentError("direction must be 'min' or 'max'")
    sign = 1.0 if direction == "min" else -1.0
    rng = np.random.default_rng(seed)
    starts = box.lower + rng.uniform(size=(restarts, box.dim)) * box.width
    shares = np.full(restarts, budget // restarts)
    shares[: budget % restarts] += 1

    history = []
    used = failures = 0
    all_converged = True
    p = box.dim

    def evaluate(x, start):
        nonlocal used, failures
        used += 1
        try:
            val = float(objective(x))
            if not np.isfinite(val):
                raise ValueError("non-finite objective value")
        except Exception as exc:  # noqa: BLE001
            failures += 1
            log.debug("objective failed at %s: %s", x, exc)
            return None
        history.append((used, start, x.copy(), val))
        return sign * val

    for s, (x0, share) in enumerate(zip(starts, shares)):
        limit = used + int(share)
        if share == 0:
            all_converged = False
            continue
        x = x0.copy()
        fx = evaluate(x, s)
        rel = initial_step
        ended_by_step = False
        while used < limit:
            if rel < min_step:
                ended_by_step = True
                break
            if fx is None:
                break
            step = rel * box.width
            best_x, best_f = None, fx
            for i in range(p):
                for sgn in (1.0, -1.0):
                    if used >= limit:
                        break
                    y = x.copy()
                    y[i] = np.clip(y[i] + sgn * step[i], box.lower[i], box.upper[i])
                    if y[i] == x[i]:
                        continue
                    fy = evaluate(y, s)
                    if fy is not None and fy < best_f:
                        best_x, best_f = y, fy
            if best_x is None:
                rel *= 0.5
            else:
                x, fx = best_x, best_f
        else:
            ended_by_step = rel < min_step
        all_converged &= ended_by_step

    if not history:
        raise OptimizationError(f"all {used} objective evaluations failed")
    vals = np.array([h[3] for h in history])
    best = int(np.argmin(sign * vals))
    return OptimizationReport(
        best_mu=history[best][2],
        best_value=float(vals[best]),
        history=history,
        evaluations=used,
        converged=bool(all_converged),
        direction=direction,
        failures=failures,
    )


optimize = compass_search


def grid_search(objective, box, points_per_dim=41, direction="min"):
    """Exhaustive evaluation on a tensor grid; returns ``(best_mu, best_value)``."""
    axes = [np.linspace(lo, hi, points_per_dim) for lo, hi in zip(box.lower, box.upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    vals = np.array([objective(x) for x in grid])
    i = int(np.argmin(vals) if direction == "min" else np.argmax(vals))
    return grid[i], float(vals[i])
