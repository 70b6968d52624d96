"""Problem-file schema, strict validation, and built-in reproduction presets.

A problem file is a single JSON object:

    {
      "n": 2,
      "density": {"diag": [0.66, 0.34]}   or a full matrix,
      "jumps": [{"V": [[0, 1], [0, 0]], "omega": -0.65, "weight": 1.0}],
      "s": 0.0,
      "tol": 1e-8, "rank_tol": 1e-9, "psd_tol": 1e-9,
      "seed": 0, "max_iter": 400, "restarts": 2
    }

Matrix entries are numbers (real) or [re, im] pairs; "density" may instead
be {"diag": [...]} for diagonal states. "omega" may be omitted per jump to
have the Bohr frequency derived from the state. Validation is strict:
unknown keys anywhere are rejected, and every error carries the JSON path
it refers to.

The presets reproduce the package's four reference problems on M_2 and
M_3; their transcendental constants are evaluated once at import time in
binary64, and the evaluated values are what gets echoed into reports.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .qms import DensityState, make_spec

OPTION_KEYS = {
    "tol": (float, lambda v: v > 0, "must be positive"),
    "rank_tol": (float, lambda v: v > 0, "must be positive"),
    "psd_tol": (float, lambda v: v > 0, "must be positive"),
    "seed": (int, lambda v: True, ""),
    "max_iter": (int, lambda v: v >= 1, "must be at least 1"),
    "restarts": (int, lambda v: v >= 0, "must be nonnegative"),
}

TOP_KEYS = {"n", "density", "jumps", "s"} | set(OPTION_KEYS)


def _require(cond, path, message):
    if not cond:
        raise SchemaError(path, message)


def _as_number(value, path):
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             path, f"expected a number, got {type(value).__name__}")
    v = float(value)
    _require(math.isfinite(v), path, "must be finite")
    return v


def _as_int(value, path):
    _require(isinstance(value, int) and not isinstance(value, bool),
             path, f"expected an integer, got {type(value).__name__}")
    return value


def _as_entry(value, path):
    # number or [re, im]
    if isinstance(value, list):
        _require(len(value) == 2, path, "complex entry must be [re, im]")
        return complex(_as_number(value[0], path + "[0]"),
                       _as_number(value[1], path + "[1]"))
    return complex(_as_number(value, path), 0.0)


def parse_matrix(value, n, path):
    """Decode an n x n complex matrix from nested JSON lists."""
    _require(isinstance(value, list) and len(value) == n,
             path, f"expected {n} rows")
    M = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(value):
        _require(isinstance(row, list) and len(row) == n,
                 f"{path}[{i}]", f"expected {n} entries")
        for j, entry in enumerate(row):
            M[i, j] = _as_entry(entry, f"{path}[{i}][{j}]")
    return M


def parse_density(value, n, path):
    if isinstance(value, dict):
        unknown = set(value) - {"diag"}
        _require(not unknown, path, f"unknown keys {sorted(unknown)}")
        _require("diag" in value, path, "expected 'diag' or a matrix")
        diag = value["diag"]
        _require(isinstance(diag, list) and len(diag) == n,
                 path + ".diag", f"expected {n} values")
        vals = [_as_number(v, f"{path}.diag[{k}]") for k, v in enumerate(diag)]
        return np.diag(np.array(vals, dtype=complex))
    return parse_matrix(value, n, path)


@dataclass
class ProblemFile:
    """Validated problem: the raw JSON echo plus constructed model objects."""

    document: dict
    n: int
    spec: object          # LindbladSpec
    s: float
    options: dict


def parse_problem(doc):
    """Validate a problem document and build the model objects.

    Raises SchemaError with a JSON path for structural problems; model
    invariant violations (non-positive density, trace off 1, sigma
    eigenvector failures) surface as the model's own ToolErrors.
    """
    _require(isinstance(doc, dict), "", "problem must be a JSON object")
    unknown = set(doc) - TOP_KEYS
    _require(not unknown, "", f"unknown keys {sorted(unknown)}")
    for key in ("n", "density", "jumps", "s"):
        _require(key in doc, "", f"missing required key '{key}'")

    n = _as_int(doc["n"], "n")
    _require(1 <= n, "n", "must be at least 1")
    s = _as_number(doc["s"], "s")
    _require(0.0 <= s <= 1.0, "s", "must lie in [0, 1]")

    D = parse_density(doc["density"], n, "density")
    state = DensityState.from_matrix(D)

    jumps_doc = doc["jumps"]
    _require(isinstance(jumps_doc, list), "jumps", "expected a list")
    jumps = []
    for k, item in enumerate(jumps_doc):
        path = f"jumps[{k}]"
        _require(isinstance(item, dict), path, "expected an object")
        unknown = set(item) - {"V", "omega", "weight"}
        _require(not unknown, path, f"unknown keys {sorted(unknown)}")
        _require("V" in item, path, "missing required key 'V'")
        V = parse_matrix(item["V"], n, path + ".V")
        omega = (_as_number(item["omega"], path + ".omega")
                 if "omega" in item else None)
        weight = (_as_number(item["weight"], path + ".weight")
                  if "weight" in item else 1.0)
        jumps.append((V, omega, weight))
    spec = make_spec(state, jumps)

    options = {}
    for key, (typ, ok, msg) in OPTION_KEYS.items():
        if key in doc:
            val = _as_int(doc[key], key) if typ is int else _as_number(doc[key], key)
            _require(ok(val), key, msg)
            options[key] = val
    return ProblemFile(doc, n, spec, s, options)


def load_problem(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError("", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"{path} is not valid JSON: {exc}") from exc
    return parse_problem(doc)


# ---------------------------------------------------------------------------
# Reference presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    problem: dict
    expected: str
    note: str


def _preset_2x2(s):
    pi = math.pi
    omega1 = -math.log((pi + 1.0) / (pi - 1.0))
    return {
        "n": 2,
        "density": {"diag": [(1.0 + 1.0 / pi) / 2.0, (1.0 - 1.0 / pi) / 2.0]},
        "jumps": [
            {"V": [[0, 1], [0, 0]], "omega": omega1},
            {"V": [[0, 0], [1, 0]], "omega": -omega1},
        ],
        "s": s,
    }


def _preset_3x3(s):
    pi, e = math.pi, math.e
    norm = 1.0 + pi ** 2 + e ** 2
    omega1 = -math.log(pi ** 2 / e ** 2)
    return {
        "n": 3,
        "density": {"diag": [1.0 / norm, pi ** 2 / norm, e ** 2 / norm]},
        "jumps": [
            {"V": [[0, 0, 0], [0, 0, 1], [0, 0, 0]], "omega": omega1},
            {"V": [[0, 0, 0], [0, 0, 0], [0, 1, 0]], "omega": -omega1},
        ],
        "s": s,
    }


def presets():
    """The four reference problems keyed by id."""
    return {
        "2x2-gns": Preset(_preset_2x2(0.0), "FEASIBLE",
                          "raising/lowering pair on M_2, GNS inner product"),
        "2x2-kms": Preset(_preset_2x2(0.5), "FEASIBLE",
                          "raising/lowering pair on M_2, KMS inner product"),
        "3x3-gns": Preset(_preset_3x3(0.0), "NOT_CONSISTENT",
                          "single off-diagonal pair on M_3, GNS inner product"),
        "3x3-kms": Preset(_preset_3x3(0.5), "NOT_PSD",
                          "single off-diagonal pair on M_3, KMS inner product"),
    }
