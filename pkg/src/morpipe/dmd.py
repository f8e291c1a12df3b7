"""Standard dynamic mode decomposition.

Snapshots ``x_1 .. x_m`` are split into ``X = [x_1 .. x_{m-1}]`` and
``Y = [x_2 .. x_m]``.  With ``X ~= U_r S_r V_r^*`` the reduced operator is
``A_tilde = U_r^* Y V_r S_r^{-1}``; its eigenpairs ``(Lambda, W)`` give the
projected modes ``U_r W`` or the exact modes ``Y V_r S_r^{-1} W``.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numerics
from .errors import ArgumentError, InputError
from .matrixio import complex_from_json, complex_to_json, dump_json, read_matrix, write_matrix

ZERO_SIGMA_RTOL = 1e-12
MODE_KINDS = ("exact", "projected")


@dataclass(frozen=True)
class SnapshotSeries:
    """Equispaced snapshots; column ``k`` of ``data`` is the state at ``t0 + k*dt``."""

    data: np.ndarray
    t0: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        data = numerics.as_matrix(self.data, "snapshot data")
        if data.shape[1] < 2:
            raise InputError("a snapshot series needs at least two snapshots")
        if not self.dt > 0:
            raise InputError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def m(self):
        return self.data.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.m)

    def save(self, csv_path, sidecar_path=None):
        csv_path = Path(csv_path)
        sidecar_path = Path(sidecar_path or csv_path.with_suffix(".json"))
        write_matrix(csv_path, self.data)
        dump_json(sidecar_path, {"t0": self.t0, "dt": self.dt, "n": self.n, "m": self.m})

    @classmethod
    def load(cls, csv_path, sidecar_path=None):
        csv_path = Path(csv_path)
        sidecar_path = Path(sidecar_path or csv_path.with_suffix(".json"))
        meta = json.loads(sidecar_path.read_text())
        data = read_matrix(csv_path)
        if data.shape != (meta["n"], meta["m"]):
            raise InputError(
                f"{csv_path}: shape {data.shape} disagrees with sidecar n={meta['n']}, m={meta['m']}"
            )
        return cls(data, meta["t0"], meta["dt"])


@dataclass(frozen=True)
class DMDModel:
    modes: np.ndarray
    eigenvalues: np.ndarray
    amplitudes: np.ndarray
    mode_kind: str
    t0: float
    dt: float

    @property
    def rank(self):
        return self.eigenvalues.size

    @property
    def frequencies(self):
        """Continuous-time exponents ``ln(lambda) / dt`` (principal branch).

        Zero eigenvalues map to ``-inf``.
        """
        lam = self.eigenvalues.astype(complex)
        with np.errstate(divide="ignore"):
            return np.log(lam) / self.dt

    def to_dict(self):
        return {
            "mode_kind": self.mode_kind,
            "rank": self.rank,
            "t0": self.t0,
            "dt": self.dt,
            "eigenvalues": complex_to_json(self.eigenvalues),
            "amplitudes": complex_to_json(self.amplitudes),
            "modes": complex_to_json(self.modes),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            modes=complex_from_json(doc["modes"]).reshape(-1, doc["rank"]),
            eigenvalues=complex_from_json(doc["eigenvalues"]).reshape(-1),
            amplitudes=complex_from_json(doc["amplitudes"]).reshape(-1),
            mode_kind=doc["mode_kind"],
            t0=float(doc["t0"]),
            dt=float(doc["dt"]),
        )


def fit(series, rank=None, mode_kind="exact"):
    """Fit a DMD model to ``series``.

    Parameters
    ----------
    series : SnapshotSeries
    rank : int, float, "full" or None
        Truncation of the SVD of ``X``; see :mod:`morpipe.numerics`.
    mode_kind : {"exact", "projected"}

    Returns
    -------
    DMDModel
        Amplitudes are the least-squares projection of the first snapshot
        onto the modes.
    """
    if mode_kind not in MODE_KINDS:
        raise ArgumentError(f"mode_kind must be one of {MODE_KINDS}, got {mode_kind!r}")
    X = series.data[:, :-1]
    Y = series.data[:, 1:]
    kmax = min(X.shape)
    if isinstance(rank, int) and not isinstance(rank, bool) and not 1 <= rank <= kmax:
        raise ArgumentError(f"rank {rank} outside [1, min(n, m-1)] = [1, {kmax}]")
    svd = numerics.svd_truncated(X, rank)
    s = svd.sigma
    keep = s > ZERO_SIGMA_RTOL * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    if not keep[0]:
        raise InputError("snapshot matrix is numerically zero")
    if not np.all(keep):
        r = int(np.count_nonzero(keep))
        warnings.warn(
            f"requested rank {s.size} includes zero singular values; reduced to {r}",
            stacklevel=2,
        )
        U, s, V = svd.U[:, :r], s[:r], svd.V[:, :r]
    else:
        U, V = svd.U, svd.V

    YVS = (Y @ V) / s
    A_tilde = U.conj().T @ YVS
    eig = numerics.eig_general(A_tilde)
    if mode_kind == "exact":
        modes = YVS @ eig.vectors
    else:
        modes = U @ eig.vectors
    amplitudes = numerics.lstsq(modes, series.data[:, 0].astype(complex))
    return DMDModel(
        modes=modes,
        eigenvalues=eig.values,
        amplitudes=amplitudes,
        mode_kind=mode_kind,
        t0=series.t0,
        dt=series.dt,
    )


def dynamics(model, k):
    """Mode coefficients ``lambda**(k-1) * b`` for 1-based snapshot indices ``k``."""
    k = np.asarray(k)
    return model.amplitudes[:, None] * model.eigenvalues[:, None] ** (np.atleast_1d(k) - 1)


def reconstruct(model, k):
    """Real part of ``Phi diag(lambda^(k-1)) b`` for the 1-based index ``k``.

    ``k`` may be an array; the result then has one column per index.
    """
    if np.any(np.asarray(k) < 1):
        raise ArgumentError("snapshot indices start at 1")
    out = (model.modes @ dynamics(model, k)).real
    return out[:, 0] if np.ndim(k) == 0 else out


def forecast(model, t):
    """State at time(s) ``t >= t0`` from ``Phi exp(omega (t - t0)) b``.

    Modes with a zero eigenvalue only contribute at ``t == t0``; they are
    dropped, with a warning, for later times.
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < model.t0):
        raise ArgumentError(f"forecast times must be >= t0 = {model.t0}")
    tau = times - model.t0
    lam = model.eigenvalues.astype(complex)
    zero = lam == 0
    omega = np.where(zero, 0.0, np.log(np.where(zero, 1.0, lam))) / model.dt
    growth = np.exp(np.outer(omega, tau))
    if np.any(zero):
        late = tau > 0
        if np.any(late):
            warnings.warn("zero-eigenvalue modes dropped from the forecast", stacklevel=2)
        growth[np.ix_(zero, late)] = 0.0
    out = (model.modes @ (model.amplitudes[:, None] * growth)).real
    return out[:, 0] if np.ndim(t) == 0 else out


def spectrum(model):
    """Rows ``(lambda, omega, |b|)`` sorted by amplitude modulus, largest first."""
    amp = np.abs(model.amplitudes)
    omega = model.frequencies
    order = np.argsort(-amp, kind="stable")
    return [(complex(model.eigenvalues[i]), complex(omega[i]), float(amp[i])) for i in order]


def spectrum_table(model):
    """Spectrum as a real matrix: ``re(lambda), im(lambda), re(omega), im(omega), |b|``."""
    rows = spectrum(model)
    return np.array(
        [[lam.real, lam.imag, om.real, om.imag, a] for lam, om, a in rows], dtype=float
    ).reshape(-1, 5)


def relative_error(model, series):
    """``||reconstruction - data||_F / ||data||_F`` over the training window."""
    rec = reconstruct(model, np.arange(1, series.m + 1))
    return float(np.linalg.norm(rec - series.data) / np.linalg.norm(series.data))


def save_model(path, model):
    dump_json(path, model.to_dict())


def load_model(path):
    return DMDModel.from_dict(json.loads(Path(path).read_text()))
