"""JSON configuration documents: loading, dotted overrides, schema validation."""

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec3 = {"type": "array", "items": _number, "minItems": 3, "maxItems": 3}
_rank = {
    "anyOf": [
        {"type": "integer", "minimum": 1},
        {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        {"enum": ["full", None]},
    ]
}

BOX = {
    "type": "object",
    "required": ["lower", "upper"],
    "properties": {
        "lower": {"type": "array", "items": _number, "minItems": 1},
        "upper": {"type": "array", "items": _number, "minItems": 1},
        "names": {"type": "array", "items": {"type": "string"}},
    },
}

INTERPOLATOR = {
    "anyOf": [
        {"enum": ["nearest", "idw", "rbf"]},
        {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["nearest", "idw", "rbf"]},
                "power": _pos,
                "kernel": {"enum": ["gaussian", "thin_plate"]},
                "epsilon": _pos,
            },
        },
    ]
}

POISSON = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "g": {"type": "integer", "minimum": 16, "maximum": 128},
        "width": _pos,
        "probe": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "qoi": {"enum": ["probe", "integral"]},
        "tol": _pos,
    },
}

PIPELINE = {
    "type": "object",
    "required": ["box", "sampling", "adapter"],
    "properties": {
        "box": BOX,
        "sampling": {
            "type": "object",
            "required": ["N"],
            "properties": {
                "method": {"enum": ["uniform", "lhs"]},
                "N": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "adapter": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["builtin", "external"]},
                "testbed": {"enum": ["poisson"]},
                "config": POISSON,
                "command": {"type": "string", "pattern": r"\{params\}"},
                "workdir": {"type": "string"},
                "timeout": _pos,
            },
        },
        "podi": {
            "type": "object",
            "properties": {"rank": _rank, "interpolator": INTERPOLATOR},
        },
        "optimize": {
            "type": "object",
            "properties": {
                "budget": {"type": "integer", "minimum": 1},
                "restarts": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "direction": {"enum": ["min", "max"]},
                "target": {
                    "anyOf": [
                        {"enum": ["qoi", "mean"]},
                        {
                            "type": "object",
                            "required": ["index"],
                            "properties": {"index": {"type": "integer", "minimum": 0}},
                        },
                    ]
                },
            },
        },
        "query": {"type": "array", "items": {"type": "array", "items": _number}},
        "database": {"type": "string"},
        "jobs": {"type": "integer", "minimum": 1},
    },
}

ADVECTION = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 3, "maximum": 1024},
        "length": _pos,
        "velocity": _number,
        "diffusivity": {"type": "number", "minimum": 0},
        "dt": _pos,
        "steps": {"type": "integer", "minimum": 1},
        "save_every": {"type": "integer", "minimum": 1},
        "t0": _number,
        "initial": {"enum": ["gaussian", "two_mode_sine"]},
        "width": _pos,
        "cfl_limit": _pos,
        "diffusion_limit": _pos,
    },
}

DMD = {
    "type": "object",
    "properties": {
        "series": {
            "type": "object",
            "required": ["csv"],
            "properties": {"csv": {"type": "string"}, "sidecar": {"type": "string"}},
        },
        "testbed": ADVECTION,
        "train": {"type": "integer", "minimum": 2},
        "rank": _rank,
        "mode_kind": {"enum": ["exact", "projected"]},
        "forecast_times": {"type": "array", "items": _number},
    },
    "anyOf": [{"required": ["series"]}, {"required": ["testbed"]}],
}

ACTIVE_SUBSPACE = {
    "type": "object",
    "properties": {
        "ridge": {
            "type": "object",
            "required": ["kind", "a"],
            "properties": {
                "kind": {"enum": ["linear", "quadratic_ridge", "exp_ridge"]},
                "a": {"type": "array", "items": _number, "minItems": 2},
            },
        },
        "samples": {"type": "string"},
        "n_samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "gradients": {"enum": ["analytic", "finite_difference"]},
        "fd_step": _pos,
        "dim": {"anyOf": [{"type": "integer", "minimum": 1}, {"enum": ["gap", None]}]},
        "degree": {"type": "integer", "minimum": 0},
    },
    "anyOf": [{"required": ["ridge"]}, {"required": ["samples"]}],
}

LATTICE = {
    "type": "object",
    "required": ["origin", "lengths", "dims"],
    "properties": {
        "origin": _vec3,
        "lengths": {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3},
        "dims": {
            "type": "array",
            "items": {"type": "integer", "minimum": 2},
            "minItems": 3,
            "maxItems": 3,
        },
        "displacements": {
            "type": "array",
            "items": {"type": "array", "items": _number, "minItems": 6, "maxItems": 6},
        },
        "input": {"type": "string"},
        "format": {"enum": ["ascii", "binary"]},
    },
}

# -- artifacts written by the CLI -------------------------------------------------

_vec = {"type": "array", "items": _number}

MANIFEST = {
    "type": "object",
    "required": ["n", "k", "p", "names", "box", "created"],
    "properties": {
        "n": {"type": "integer", "minimum": 0},
        "k": {"type": "integer", "minimum": 0},
        "p": {"type": "integer", "minimum": 1},
        "names": {"type": "array", "items": {"type": "string"}},
        "box": {"anyOf": [{"type": "null"}, {"type": "object", "required": ["lower", "upper"],
                                              "properties": {"lower": _vec, "upper": _vec}}]},
        "created": {"type": "string"},
        "has_qoi": {"type": "boolean"},
        "provenance": {"type": "object"},
    },
}

REPORT = {
    "type": "object",
    "required": ["best_mu", "best_value", "evaluations", "converged", "direction", "history_length"],
    "properties": {
        "best_mu": _vec,
        "best_value": _number,
        "evaluations": {"type": "integer", "minimum": 1},
        "converged": {"type": "boolean"},
        "direction": {"enum": ["min", "max"]},
        "failures": {"type": "integer", "minimum": 0},
        "history_length": {"type": "integer", "minimum": 1},
    },
}

BASIS = {
    "type": "object",
    "required": ["rank", "sigma", "interpolator"],
    "properties": {
        "rank": {"type": "integer", "minimum": 1},
        "sigma": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "interpolator": INTERPOLATOR,
    },
}

_complex = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}

DMD_MODEL = {
    "type": "object",
    "required": ["mode_kind", "rank", "t0", "dt", "eigenvalues", "amplitudes", "modes"],
    "properties": {
        "mode_kind": {"enum": ["exact", "projected"]},
        "rank": {"type": "integer", "minimum": 1},
        "t0": _number,
        "dt": _pos,
        "eigenvalues": {"type": "array", "items": _complex},
        "amplitudes": {"type": "array", "items": _complex},
        "modes": {"type": "array", "items": {"type": "array", "items": _complex}},
    },
}

AS_RESULT = {
    "type": "object",
    "required": ["eigenvalues", "W", "M"],
    "properties": {
        "eigenvalues": _vec,
        "W": {"type": "array", "items": _vec},
        "M": {"type": "integer", "minimum": 1},
    },
}

ARTIFACT_SCHEMAS = {
    "manifest": MANIFEST,
    "report": REPORT,
    "basis": BASIS,
    "dmd_model": DMD_MODEL,
    "as_result": AS_RESULT,
}

SCHEMAS = {
    "pipeline": PIPELINE,
    "dmd": DMD,
    "as": ACTIVE_SUBSPACE,
    "deform": LATTICE,
}
SUBCOMMAND_KIND = {
    "deform": "deform",
    "dmd": "dmd",
    "as": "as",
    "podi": "pipeline",
    "offline": "pipeline",
    "optimize": "pipeline",
}


def load_document(path):
    """Parse a JSON file; malformed JSON raises :class:`ConfigError` with its position."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None


def parse_override(item):
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def apply_overrides(doc, overrides):
    """Return a copy of ``doc`` with dotted-path assignments applied."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        parts = key.split(".")
        node = doc
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = node[part] = {}
            node = nxt
        node[parts[-1]] = value
    return doc


def infer_kind(doc):
    if not isinstance(doc, dict):
        return "pipeline"
    if "dims" in doc or "lengths" in doc:
        return "deform"
    if "series" in doc or "testbed" in doc:
        return "dmd"
    if "ridge" in doc or "samples" in doc:
        return "as"
    return "pipeline"


_CONSTRAINTS = {
    "minimum": ">=",
    "exclusiveMinimum": ">",
    "maximum": "<=",
    "exclusiveMaximum": "<",
}


def _describe(err):
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else err.message
        field = f"{path}.{missing}" if path else missing
        return f"{field}: required field missing"
    where = path or "<root>"
    if err.validator in _CONSTRAINTS:
        return f"{where}: must be {_CONSTRAINTS[err.validator]} {err.validator_value} (got {err.instance!r})"
    if err.validator == "enum":
        return f"{where}: must be one of {err.validator_value} (got {err.instance!r})"
    if err.validator == "type":
        return f"{where}: must be of type {err.validator_value} (got {err.instance!r})"
    if err.validator == "anyOf" and err.context:
        inner = sorted({_describe(e) for e in err.context})
        return f"{where}: no alternative matched ({'; '.join(inner)})"
    return f"{where}: {err.message}"


def validate(doc, kind=None):
    """List of human-readable diagnostics; empty when ``doc`` is valid.

    ``kind`` names a config schema or, for files the CLI writes, one of
    ``ARTIFACT_SCHEMAS``; it is inferred for configs when omitted.
    """
    kind = kind or infer_kind(doc)
    schema = SCHEMAS.get(kind) or ARTIFACT_SCHEMAS.get(kind)
    if schema is None:
        raise ConfigError(f"unknown config kind {kind!r}")
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    return [_describe(e) for e in errors]


def validate_config(path, kind=None):
    """Load and validate a config file; returns ``(doc, diagnostics)``."""
    doc = load_document(path)
    return doc, validate(doc, kind)


def require_valid(doc, kind):
    problems = validate(doc, kind)
    if problems:
        raise ConfigError("; ".join(problems))
    return doc
