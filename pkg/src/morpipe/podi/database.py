"""Persisted snapshot database: parameter rows, snapshot columns, optional QoI."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..activesubspace import BoxDomain
from ..errors import ArgumentError, DatabaseError, InputError
from ..matrixio import dump_json, read_matrix, write_matrix

MANIFEST = "manifest.json"
PARAMS = "params.csv"
SNAPSHOTS = "snapshots.csv"
QOI = "qoi.csv"


@dataclass(frozen=True)
class SnapshotDatabase:
    """Immutable collection of full-order evaluations.

    Attributes
    ----------
    params : ndarray, shape (k, p)
        Row ``j`` is the parameter vector of snapshot ``j``.
    snapshots : ndarray, shape (n, k)
    qoi : ndarray, shape (k,), optional
    names : tuple of str
        Parameter names, length ``p``.
    box : BoxDomain, optional
        Parameter domain; when set, interpolation distances are measured in
        box-normalized coordinates.
    provenance : dict
        Free-form JSON-compatible metadata (creator, failures, ...).
    """

    params: np.ndarray
    snapshots: np.ndarray
    qoi: np.ndarray = None
    names: tuple = None
    box: BoxDomain = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.asarray(self.params, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        S = np.asarray(self.snapshots, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        if P.ndim != 2 or S.ndim != 2:
            raise ArgumentError("params and snapshots must be 2-D")
        if S.shape[1] != P.shape[0]:
            raise InputError(
                f"{S.shape[1]} snapshot columns but {P.shape[0]} parameter rows"
            )
        if P.shape[0] and len(np.unique(P, axis=0)) != P.shape[0]:
            raise InputError("duplicate parameter rows")
        q = self.qoi
        if q is not None:
            q = np.asarray(q, dtype=float).reshape(-1)
            if q.size != P.shape[0]:
                raise InputError(f"{q.size} QoI values for {P.shape[0]} snapshots")
        names = tuple(self.names) if self.names is not None else tuple(
            f"mu{i}" for i in range(P.shape[1])
        )
        if len(names) != P.shape[1]:
            raise InputError(f"{len(names)} names for {P.shape[1]} parameters")
        if self.box is not None and self.box.dim != P.shape[1]:
            raise InputError("box dimension does not match the parameters")
        object.__setattr__(self, "params", P)
        object.__setattr__(self, "snapshots", S)
        object.__setattr__(self, "qoi", q)
        object.__setattr__(self, "names", names)

    @property
    def n(self):
        return self.snapshots.shape[0]

    @property
    def k(self):
        return self.params.shape[0]

    @property
    def p(self):
        return self.params.shape[1]

    def contains(self, mu):
        return bool(np.any(np.all(self.params == np.asarray(mu, dtype=float), axis=1)))

    def subset(self, index):
        """Database restricted to the given column indices (in that order)."""
        index = np.asarray(index, dtype=int)
        return SnapshotDatabase(
            self.params[index],
            self.snapshots[:, index],
            None if self.qoi is None else self.qoi[index],
            self.names,
            self.box,
            dict(self.provenance),
        )

    def manifest(self):
        return {
            "n": self.n,
            "k": self.k,
            "p": self.p,
            "names": list(self.names),
            "box": None if self.box is None else self.box.to_dict(),
            "created": self.provenance.get("created", f"morpipe {__version__}"),
            "has_qoi": self.qoi is not None,
            "provenance": {k: v for k, v in self.provenance.items() if k != "created"},
        }


def db_save(db, directory):
    """Write ``db`` as ``manifest.json``, ``params.csv``, ``snapshots.csv`` [, ``qoi.csv``]."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    dump_json(d / MANIFEST, db.manifest())
    write_matrix(d / PARAMS, db.params)
    write_matrix(d / SNAPSHOTS, db.snapshots)
    qpath = d / QOI
    if db.qoi is not None:
        write_matrix(qpath, db.qoi[:, None])
    elif qpath.exists():
        qpath.unlink()


def _read(path):
    if not path.is_file():
        raise DatabaseError(f"{path}: file missing")
    try:
        return read_matrix(path)
    except InputError as exc:
        raise DatabaseError(str(exc)) from None


def db_load(directory):
    """Read a database directory written by :func:`db_save`.

    Raises
    ------
    DatabaseError
        If a file is missing or the matrices disagree in shape; the message
        names the offending file.
    """
    d = Path(directory)
    mpath = d / MANIFEST
    if not mpath.is_file():
        raise DatabaseError(f"{mpath}: file missing")
    try:
        man = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise DatabaseError(f"{mpath}: {exc}") from None
    P = _read(d / PARAMS)
    S = _read(d / SNAPSHOTS)
    k, p, n = man.get("k"), man.get("p"), man.get("n")
    if k == 0:
        P, S = np.zeros((0, p)), np.zeros((n, 0))
    if P.shape != (k, p):
        raise DatabaseError(f"{d / PARAMS}: shape {P.shape}, manifest says ({k}, {p})")
    if S.shape[1] != P.shape[0]:
        raise DatabaseError(
            f"{d / SNAPSHOTS}: {S.shape[1]} columns but {PARAMS} has {P.shape[0]} rows"
        )
    if S.shape[0] != n:
        raise DatabaseError(f"{d / SNAPSHOTS}: {S.shape[0]} rows, manifest says n={n}")
    q = None
    qpath = d / QOI
    if qpath.is_file():
        Q = _read(qpath)
        if Q.size == 0:
            q = None
        elif Q.shape != (k, 1):
            raise DatabaseError(f"{qpath}: shape {Q.shape}, expected ({k}, 1)")
        else:
            q = Q[:, 0]
    box = BoxDomain.from_dict(man["box"]) if man.get("box") else None
    prov = dict(man.get("provenance") or {})
    prov["created"] = man.get("created")
    try:
        return SnapshotDatabase(P, S, q, man.get("names"), box, prov)
    except InputError as exc:
        raise DatabaseError(f"{d}: {exc}") from None
