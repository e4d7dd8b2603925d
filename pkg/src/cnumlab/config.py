"""Run configuration: JSON file plus command-line overrides, validated up front."""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .ensemble import Truncation, integrand_extent
from .fock import ModeSet, TruncationError
from .hamiltonian import GasParams, gas_bases

SCHEMA_VERSION = "1.0"
KINDS = ("audit", "sweep", "weights", "quasi-average", "magnet", "griffiths", "pathological")
WORKERS_ENV = "CNUMLAB_WORKERS"
SUITE_SEED = 20240601
SUITE_SIZE = 20
SUITE_DIM_LIMIT = 2000

DEFAULTS: dict[str, Any] = {
    "kind": "audit",
    "gas": {"k_max": 0, "length": 4.0, "g": 0.5, "nu": None, "phi": None,
            "mu": -0.5, "lambda": 0.0, "beta": 1.0},
    "lattice": {"d": 1, "s": 0.5, "J": 1.0, "beta": 1.0},
    "grids": {"mu": None, "lambda": None, "beta": None, "V": None,
              "B": [0.0], "sites": [2], "beta_lambda": [1.0]},
    "truncation": {"n_max_other": 3, "n_max_zero": None, "n_total_max": None, "dim_cap": 20000},
    "quadrature": {"tol_quad": 1e-8},
    "griffiths": {"source": "coins", "ns": list(range(20, 201, 20)), "bias": 0.0,
                  "y_max": 1.0, "n_y": 41, "h": None, "epsilon": 0.1, "path": None,
                  "sizes": list(range(2, 11)), "beta": 1.0},
    "suite": "bundled",
    "seed": SUITE_SEED,
    "out": "cnumlab-out",
    "workers": None,
}

GRIFFITHS_SOURCES = ("coins", "two-point", "point-mass", "magnet", "file")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration. ``data`` holds every field, defaults included."""

    data: dict

    @property
    def kind(self) -> str:
        return self.data["kind"]

    @property
    def out(self) -> Path:
        return Path(self.data["out"])

    @property
    def workers(self) -> int:
        return int(self.data["workers"])

    def block(self, name: str) -> dict:
        return self.data[name]

    def hashable(self) -> dict:
        """Everything that affects results; output location and worker count do not."""
        return {k: v for k, v in self.data.items() if k not in ("out", "workers")}

    def config_hash(self) -> str:
        return config_hash(self.hashable())

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"


def config_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# --------------------------------------------------------------------------
# resolution and validation


def _merge(base: dict, top: dict, path: str, errors: list[str]) -> dict:
    out = copy.deepcopy(base)
    for key, value in top.items():
        where = f"{path}{key}"
        if key not in base:
            errors.append(f"{where}: unknown field")
            continue
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                errors.append(f"{where}: expected an object")
                continue
            out[key] = _merge(base[key], value, where + ".", errors)
        else:
            out[key] = value
    return out


def _num(errors, where, v, *, positive=False, nonneg=False, integer=False, allow_none=False):
    if v is None:
        if not allow_none:
            errors.append(f"{where}: required")
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{where}: expected a number, got {v!r}")
        return
    if not math.isfinite(v):
        errors.append(f"{where}: must be finite")
    elif integer and int(v) != v:
        errors.append(f"{where}: expected an integer, got {v!r}")
    elif positive and not v > 0:
        errors.append(f"{where}: must be positive, got {v!r}")
    elif nonneg and v < 0:
        errors.append(f"{where}: must be non-negative, got {v!r}")


def _num_list(errors, where, v, allow_none=True, **kw):
    if v is None:
        if not allow_none:
            errors.append(f"{where}: required")
        return
    if not isinstance(v, list) or not v:
        errors.append(f"{where}: expected a non-empty list")
        return
    for i, item in enumerate(v):
        _num(errors, f"{where}[{i}]", item, **kw)


def _validate(d: dict, errors: list[str]):
    if d["kind"] not in KINDS:
        errors.append(f"kind: must be one of {', '.join(KINDS)}, got {d['kind']!r}")
    g = d["gas"]
    _num(errors, "gas.k_max", g["k_max"], nonneg=True, integer=True)
    _num(errors, "gas.length", g["length"], positive=True)
    _num(errors, "gas.g", g["g"], allow_none=g["nu"] is not None)
    _num(errors, "gas.phi", g["phi"], nonneg=True, allow_none=True)
    _num(errors, "gas.mu", g["mu"])
    _num(errors, "gas.lambda", g["lambda"])
    _num(errors, "gas.beta", g["beta"], positive=True)
    if g["nu"] is not None and not isinstance(g["nu"], dict):
        errors.append("gas.nu: expected an object mapping transfers to values")
    lat = d["lattice"]
    _num(errors, "lattice.d", lat["d"], positive=True, integer=True)
    _num(errors, "lattice.s", lat["s"], positive=True)
    if isinstance(lat["s"], (int, float)) and abs(2 * lat["s"] - round(2 * lat["s"])) > 1e-12:
        errors.append(f"lattice.s: must be a half-integer, got {lat['s']!r}")
    _num(errors, "lattice.J", lat["J"], nonneg=True)
    _num(errors, "lattice.beta", lat["beta"], positive=True)
    gr = d["grids"]
    _num_list(errors, "grids.mu", gr["mu"])
    _num_list(errors, "grids.lambda", gr["lambda"])
    _num_list(errors, "grids.beta", gr["beta"], positive=True)
    _num_list(errors, "grids.V", gr["V"], positive=True)
    _num_list(errors, "grids.B", gr["B"], allow_none=False)
    _num_list(errors, "grids.sites", gr["sites"], allow_none=False, positive=True, integer=True)
    _num_list(errors, "grids.beta_lambda", gr["beta_lambda"], allow_none=False, nonneg=True)
    t = d["truncation"]
    _num(errors, "truncation.n_max_other", t["n_max_other"], positive=True, integer=True)
    _num(errors, "truncation.n_max_zero", t["n_max_zero"], positive=True, integer=True, allow_none=True)
    _num(errors, "truncation.n_total_max", t["n_total_max"], positive=True, integer=True,
         allow_none=True)
    _num(errors, "truncation.dim_cap", t["dim_cap"], positive=True, integer=True)
    _num(errors, "quadrature.tol_quad", d["quadrature"]["tol_quad"], positive=True)
    gf = d["griffiths"]
    if gf["source"] not in GRIFFITHS_SOURCES:
        errors.append(f"griffiths.source: must be one of {', '.join(GRIFFITHS_SOURCES)}")
    _num_list(errors, "griffiths.ns", gf["ns"], allow_none=False, positive=True, integer=True)
    if isinstance(gf["ns"], list) and any(b <= a for a, b in zip(gf["ns"], gf["ns"][1:])):
        errors.append("griffiths.ns: must be strictly increasing")
    _num(errors, "griffiths.bias", gf["bias"])
    _num(errors, "griffiths.y_max", gf["y_max"], positive=True)
    _num(errors, "griffiths.n_y", gf["n_y"], positive=True, integer=True)
    _num_list(errors, "griffiths.h", gf["h"], positive=True)
    _num(errors, "griffiths.epsilon", gf["epsilon"], positive=True)
    _num_list(errors, "griffiths.sizes", gf["sizes"], allow_none=False, positive=True, integer=True)
    _num(errors, "griffiths.beta", gf["beta"], positive=True)
    if gf["source"] == "file" and not gf["path"]:
        errors.append("griffiths.path: required when griffiths.source is 'file'")
    suite = d["suite"]
    if not (suite == "bundled" or suite == "random" or isinstance(suite, list)
            or (isinstance(suite, str) and suite.endswith(".json"))):
        errors.append("suite: expected 'bundled', 'random', a .json path, or a list of points")
    _num(errors, "seed", d["seed"], nonneg=True, integer=True)
    if not isinstance(d["out"], str) or not d["out"]:
        errors.append("out: expected a directory path")
    _num(errors, "workers", d["workers"], positive=True, integer=True)


def resolve_config(raw: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, the config document and flag overrides (flags win), then validate.

    Overrides are keyed by dotted paths such as ``"grids.V"``. Every invalid
    field is reported in one ConfigError.
    """
    errors: list[str] = []
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(["config: expected a JSON object"])
    raw = dict(raw or {})
    raw.pop("schema_version", None)
    data = _merge(DEFAULTS, raw, "", errors)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node[p]
        node[parts[-1]] = value
    if data["workers"] is None:
        env = os.environ.get(WORKERS_ENV)
        if env is None:
            data["workers"] = 1
        else:
            try:
                data["workers"] = int(env)
            except ValueError:
                errors.append(f"{WORKERS_ENV}: expected an integer, got {env!r}")
                data["workers"] = 1
    _validate(data, errors)
    if errors:
        raise ConfigError(errors)
    for key in ("n_max_other", "n_max_zero", "n_total_max", "dim_cap"):
        v = data["truncation"][key]
        data["truncation"][key] = None if v is None else int(v)
    data["schema_version"] = SCHEMA_VERSION
    return RunConfig(data)


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    raw = None
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError([f"config: file not found: {path}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: not valid JSON ({exc})"]) from None
    return resolve_config(raw, overrides)


# --------------------------------------------------------------------------
# building model objects from blocks


def gas_from_block(block: dict) -> GasParams:
    modes = ModeSet.chain(int(block["k_max"]), float(block["length"]))
    kw = dict(mu=block["mu"], lam=block["lambda"], beta=block["beta"], phi=block["phi"])
    if block.get("nu") is not None:
        return GasParams(modes, block["nu"], **kw)
    return GasParams.contact(modes, float(block["g"]), **kw)


def truncation_from_block(block: dict) -> Truncation:
    return Truncation(n_max_other=block["n_max_other"], n_max_zero=block["n_max_zero"],
                      n_total_max=block["n_total_max"], dim_cap=block["dim_cap"])


def sweep_points(cfg: RunConfig) -> list[dict]:
    """Gas blocks for the product grid mu x lambda x beta x V (in that nesting order)."""
    base = cfg.block("gas")
    gr = cfg.block("grids")
    mus = gr["mu"] or [base["mu"]]
    lams = gr["lambda"] or [base["lambda"]]
    betas = gr["beta"] or [base["beta"]]
    vols = gr["V"] or [base["length"]]
    out = []
    for mu, lam, beta, V in itertools.product(mus, lams, betas, vols):
        g = dict(base)
        g.update({"mu": mu, "lambda": lam, "beta": beta, "length": V})
        out.append(g)
    return out


# --------------------------------------------------------------------------
# the randomized audit suite


def _suite_candidate(rng: np.random.Generator) -> dict:
    k_max = int(rng.integers(0, 2))
    return {
        "gas": {
            "k_max": k_max,
            "length": round(float(rng.uniform(2.0, 6.0)), 4),
            "g": round(float(rng.uniform(0.0, 1.0)), 4),
            "nu": None,
            "phi": None,
            "mu": round(float(rng.uniform(-2.0, 0.3)), 4),
            "lambda": round(float(rng.uniform(0.0, 0.8)), 4),
            "beta": round(float(rng.uniform(0.2, 4.0)), 4),
        },
        "truncation": {"n_max_other": int(rng.integers(2, 5)), "n_max_zero": None,
                       "n_total_max": None, "dim_cap": 20000},
    }


def suite_rejection(point: dict, dim_limit: int = SUITE_DIM_LIMIT) -> str | None:
    """Reason a drawn point is unusable, or None."""
    params = gas_from_block(point["gas"])
    t = point["truncation"]
    try:
        _, bp = gas_bases(params, 1, t["n_max_other"])
        _, r_hi = integrand_extent(params, bp)
    except TruncationError as exc:
        return f"unstable: {exc}"
    n0 = int(math.ceil(r_hi**2 + 6 * r_hi + 12))
    dim = (n0 + 1) * bp.dim
    if dim > dim_limit:
        return f"dimension {dim} exceeds {dim_limit}"
    return None


def generate_audit_suite(seed: int = SUITE_SEED, size: int = SUITE_SIZE,
                         dim_limit: int = SUITE_DIM_LIMIT) -> tuple[list[dict], list[dict]]:
    """Draw points until ``size`` are accepted; returns (accepted, rejected-with-reason)."""
    rng = np.random.default_rng(seed)
    accepted, rejected = [], []
    while len(accepted) < size:
        point = _suite_candidate(rng)
        reason = suite_rejection(point, dim_limit)
        if reason is None:
            accepted.append(point)
        else:
            rejected.append({"point": point, "reason": reason})
    return accepted, rejected


def bundled_suite() -> list[dict]:
    text = resources.files("cnumlab").joinpath("data/audit_suite.json").read_text()
    return json.loads(text)["points"]


def suite_points(cfg: RunConfig) -> list[dict]:
    suite = cfg.data["suite"]
    if suite == "bundled":
        return bundled_suite()
    if suite == "random":
        return generate_audit_suite(int(cfg.data["seed"]))[0]
    if isinstance(suite, str):
        try:
            doc = json.loads(Path(suite).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"suite: cannot read {suite} ({exc})"]) from None
        return doc["points"] if isinstance(doc, dict) else doc
    errors: list[str] = []
    points = []
    for i, p in enumerate(suite):
        if not isinstance(p, dict):
            errors.append(f"suite[{i}]: expected an object")
            continue
        point = {"gas": _merge(DEFAULTS["gas"], p.get("gas", {}), f"suite[{i}].gas.", errors),
                 "truncation": _merge(DEFAULTS["truncation"], p.get("truncation", {}),
                                      f"suite[{i}].truncation.", errors)}
        points.append(point)
    if errors:
        raise ConfigError(errors)
    return points
