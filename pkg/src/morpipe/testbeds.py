"""Desk-scale full-order models used as data sources.

* periodic 1-D advection-diffusion (explicit upwind + central diffusion)
  producing snapshot series for DMD;
* 2-D Poisson problem with a Gaussian source on the unit square, solved by
  5-point finite differences and conjugate gradients, producing parametric
  fields for PODI and the optimizer;
* analytic ridge functions with exact gradients for active subspaces.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .dmd import SnapshotSeries
from .errors import ArgumentError, ConfigError, NumericalError


@dataclass(frozen=True)
class AdvectionDiffusionConfig:
    n: int = 128
    length: float = 1.0
    velocity: float = 1.0
    diffusivity: float = 0.0
    dt: float = 1e-3
    steps: int = 100
    save_every: int = 1
    t0: float = 0.0
    initial: str = "gaussian"
    width: float = 0.05
    cfl_limit: float = 0.9
    diffusion_limit: float = 0.45

    @property
    def dx(self):
        return self.length / self.n

    def check(self):
        if self.n < 3:
            raise ConfigError("n: need at least 3 grid points")
        if not self.length > 0:
            raise ConfigError("length: must be > 0")
        if not self.dt > 0:
            raise ConfigError(f"dt: must be > 0, got {self.dt}")
        if self.diffusivity < 0:
            raise ConfigError("diffusivity: must be >= 0")
        if self.steps < 1 or self.save_every < 1:
            raise ConfigError("steps and save_every must be >= 1")
        if self.initial not in INITIAL_CONDITIONS:
            raise ConfigError(
                f"initial: unknown initial condition {self.initial!r}; "
                f"expected one of {sorted(INITIAL_CONDITIONS)}"
            )
        cfl = abs(self.velocity) * self.dt / self.dx
        if cfl > self.cfl_limit:
            raise ConfigError(f"CFL number {cfl:.4g} exceeds {self.cfl_limit}")
        diff = self.diffusivity * self.dt / self.dx**2
        if diff > self.diffusion_limit:
            raise ConfigError(f"diffusion number {diff:.4g} exceeds {self.diffusion_limit}")


def _gaussian_bump(x, cfg):
    return np.exp(-(((x - 0.5 * cfg.length) / cfg.width) ** 2))


def _two_mode_sine(x, cfg):
    k = 2.0 * np.pi / cfg.length
    return np.sin(k * x) + 0.5 * np.sin(3.0 * k * x)


INITIAL_CONDITIONS = {"gaussian": _gaussian_bump, "two_mode_sine": _two_mode_sine}


def advection_diffusion_step(u, cfg):
    c = cfg.velocity * cfg.dt / cfg.dx
    d = cfg.diffusivity * cfg.dt / cfg.dx**2
    left = np.roll(u, 1)
    right = np.roll(u, -1)
    # convex-combination form keeps CFL = 1 transport exact
    upwind = (1.0 - c) * u + c * left if c >= 0 else (1.0 + c) * u - c * right
    return upwind + d * (right - 2.0 * u + left)


def advection_diffusion_series(cfg):
    """Integrate the periodic advection-diffusion equation.

    Returns ``steps // save_every + 1`` snapshots (the initial condition
    included), spaced ``dt * save_every`` apart and starting at ``t0``.
    """
    cfg.check()
    x = cfg.dx * np.arange(cfg.n)
    u = INITIAL_CONDITIONS[cfg.initial](x, cfg)
    snaps = [u.copy()]
    for step in range(1, cfg.steps + 1):
        u = advection_diffusion_step(u, cfg)
        if step % cfg.save_every == 0:
            snaps.append(u.copy())
    return SnapshotSeries(np.column_stack(snaps), t0=cfg.t0, dt=cfg.dt * cfg.save_every)


@dataclass(frozen=True)
class PoissonConfig:
    """Poisson problem ``-lap u = exp(-((x-a)^2 + (y-b)^2) / w^2)``, ``u = 0`` on the boundary.

    ``g`` counts grid nodes per side *including* the boundary, so fields
    have ``g * g`` entries and spacing ``1 / (g - 1)``.
    """

    g: int = 32
    width: float = 0.2
    probe: tuple = (0.5, 0.5)
    qoi: str = "probe"
    tol: float = 1e-10

    def check(self):
        if self.g < 16:
            raise ConfigError(f"g: must be >= 16, got {self.g}")
        if not self.width > 0:
            raise ConfigError("width: must be > 0")
        px, py = self.probe
        if not (0 <= px <= 1 and 0 <= py <= 1):
            raise ConfigError("probe: must lie in the unit square")
        if self.qoi not in ("probe", "integral"):
            raise ConfigError("qoi: expected 'probe' or 'integral'")

    @property
    def h(self):
        return 1.0 / (self.g - 1)

    def nodes(self):
        return np.linspace(0.0, 1.0, self.g)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        if "probe" in doc:
            doc["probe"] = tuple(doc["probe"])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"poisson config: {exc}") from None

    def to_dict(self):
        d = asdict(self)
        d["probe"] = list(self.probe)
        return d


def _neg_laplacian(v, h):
    # v holds interior unknowns; zero Dirichlet padding implied.
    p = np.pad(v, 1)
    return (4.0 * v - p[:-2, 1:-1] - p[2:, 1:-1] - p[1:-1, :-2] - p[1:-1, 2:]) / h**2


def conjugate_gradient(apply, b, tol=1e-10, maxiter=None):
    """Solve ``apply(x) = b`` for SPD ``apply``; stops at ``||r|| <= tol ||b||``."""
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = np.vdot(r, r)
    bnorm = np.sqrt(np.vdot(b, b))
    if bnorm == 0:
        return x, 0
    maxiter = maxiter or 10 * b.size
    for it in range(1, maxiter + 1):
        Ap = apply(p)
        alpha = rr / np.vdot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = np.vdot(r, r)
        if np.sqrt(rr_new) <= tol * bnorm:
            return x, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NumericalError(f"conjugate gradient did not converge in {maxiter} iterations")


def qoi_weights(cfg):
    """Weights ``q`` with ``qoi = q @ field`` for the configured functional."""
    g = cfg.g
    wts = np.zeros((g, g))
    if cfg.qoi == "integral":
        w1 = np.full(g, cfg.h)
        w1[[0, -1]] *= 0.5
        wts[:] = np.outer(w1, w1)
    else:
        px, py = cfg.probe
        fx, fy = px / cfg.h, py / cfg.h
        i0, j0 = min(int(fx), g - 2), min(int(fy), g - 2)
        tx, ty = fx - i0, fy - j0
        wts[i0, j0] = (1 - tx) * (1 - ty)
        wts[i0 + 1, j0] = tx * (1 - ty)
        wts[i0, j0 + 1] = (1 - tx) * ty
        wts[i0 + 1, j0 + 1] = tx * ty
    return wts.reshape(-1)


def poisson_solve(cfg, mu):
    """Solve the Poisson testbed at ``mu = (a, b)`` or ``(a, b, w)``.

    Returns
    -------
    field : ndarray, shape (g*g,)
        Nodal solution, row-major with index ``i * g + j`` for ``(x_i, y_j)``.
    qoi : float
    """
    cfg.check()
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.size == 2:
        a, b = mu
        w = cfg.width
    elif mu.size == 3:
        a, b, w = mu
    else:
        raise ArgumentError(f"Poisson parameters are (a, b) or (a, b, w), got {mu.size} values")
    if not w > 0:
        raise ArgumentError("source width must be positive")
    x = cfg.nodes()[1:-1]
    X, Y = np.meshgrid(x, x, indexing="ij")
    rhs = np.exp(-((X - a) ** 2 + (Y - b) ** 2) / w**2)
    h = cfg.h
    v, _ = conjugate_gradient(
        lambda p: _neg_laplacian(p, h), rhs, tol=cfg.tol, maxiter=10 * cfg.g**2
    )
    u = np.zeros((cfg.g, cfg.g))
    u[1:-1, 1:-1] = v
    field_ = u.reshape(-1)
    return field_, float(qoi_weights(cfg) @ field_)


@dataclass(frozen=True)
class RidgeFunction:
    """``f(mu) = h(a . mu)`` with analytic gradient ``h'(a . mu) a``."""

    kind: str
    a: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kind not in RIDGE_KINDS:
            raise ArgumentError(f"unknown ridge function {self.kind!r}; expected one of {RIDGE_KINDS}")
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))

    def __call__(self, mu):
        z = np.asarray(mu, dtype=float) @ self.a
        if self.kind == "linear":
            return z
        if self.kind == "quadratic_ridge":
            return z**2
        return np.exp(z)

    def gradient(self, mu):
        mu = np.asarray(mu, dtype=float)
        z = mu @ self.a
        if self.kind == "linear":
            dh = np.ones_like(z)
        elif self.kind == "quadratic_ridge":
            dh = 2.0 * z
        else:
            dh = np.exp(z)
        return np.multiply.outer(dh, self.a)


RIDGE_KINDS = ("linear", "quadratic_ridge", "exp_ridge")


def ridge_functions(kind, a):
    return RidgeFunction(kind, a)
