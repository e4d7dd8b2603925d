"""Append-only result archive and its table/summary renderings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .config import SCHEMA_VERSION, RunConfig, config_hash


class ArchiveError(ValueError):
    pass


@dataclass
class ResultArchive:
    """Per-point records of one run. Records can be appended, never edited or removed."""

    kind: str
    config: dict
    config_hash: str
    run_id: str
    timestamp: str
    _records: list = field(default_factory=list, repr=False)

    @classmethod
    def start(cls, cfg: RunConfig) -> "ResultArchive":
        h = cfg.config_hash()
        stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return cls(cfg.kind, cfg.data, h, f"{cfg.kind}-{h[:12]}", stamp)

    def append(self, record: dict):
        self._records.append(json.loads(json.dumps(record)))

    def extend(self, records):
        for r in records:
            self.append(r)

    @property
    def records(self) -> tuple:
        return tuple(self._records)

    def audit_summary(self) -> dict:
        checks = [c for r in self._records for c in r.get("audit", [])]
        failed = [i for i, r in enumerate(self._records) if r.get("verdict") == "fail"]
        return {"points": len(self._records),
                "checks_total": len(checks),
                "checks_passed": sum(1 for c in checks if c["passed"]),
                "failed_points": failed}

    @property
    def audit_failed(self) -> bool:
        return bool(self.audit_summary()["failed_points"])

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "run_id": self.run_id,
                "timestamp": self.timestamp, "kind": self.kind,
                "config_hash": self.config_hash, "config": self.config,
                "records": list(self._records), "summary": self.audit_summary()}

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ResultArchive":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ArchiveError(f"cannot read archive {path}: {exc}") from None
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ArchiveError(f"unsupported archive schema {doc.get('schema_version')!r}")
        cfg = doc["config"]
        hashable = {k: v for k, v in cfg.items() if k not in ("out", "workers")}
        if config_hash(hashable) != doc["config_hash"]:
            raise ArchiveError("config hash does not match the embedded config")
        arch = cls(doc["kind"], cfg, doc["config_hash"], doc["run_id"], doc["timestamp"])
        arch.extend(doc["records"])
        return arch


# --------------------------------------------------------------------------
# tables


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


AUDIT_COLUMNS = ["mu", "lambda", "beta", "V", "Xi_prime", "Xi", "Xi_dprime", "Xi_max",
                 "slack", "verdict"]
PRESSURE_COLUMNS = ["mu", "lambda", "beta", "V", "p_prime", "p", "p_dprime", "p_max",
                    "z_max_re", "z_max_im", "rho_dprime", "n_max_zero", "dim"]


def _point_key(params: dict) -> list:
    return [params["mu"], params["lambda"], params["beta"], params["volume"]]


def audit_tables(records) -> dict[str, tuple[list, list]]:
    audit_rows, pressure_rows = [], []
    for r in records:
        key = _point_key(r["params"])
        audit_rows.append(key + [r["Xi_prime"], r["Xi"], r["Xi_dprime"], r["Xi_max"],
                                 r["margin"], r["verdict"]])
        pressure_rows.append(key + [r["p_prime"], r["p"], r["p_dprime"], r["p_max"],
                                    r["z_max"][0], r["z_max"][1], r["rho_dprime"],
                                    r["truncation"]["n_max_zero"], r["truncation"]["dim"]])
    return {"audit.csv": (AUDIT_COLUMNS, audit_rows),
            "pressures.csv": (PRESSURE_COLUMNS, pressure_rows)}


def weight_tables(records):
    obs_header = ["mu", "lambda", "beta", "V", "n0", "a0_re", "a0_im", "n0_weight",
                  "a0_weight_re", "a0_weight_im", "weight_norm", "n0_density",
                  "order_param_sq", "zmax_density", "tilt_identity_error"]
    obs, prof = [], []
    for r in records:
        key = _point_key(r["params"])
        o = r["observables"]
        obs.append(key + [o["n0"], o["a0"][0], o["a0"][1], o["n0_weight"], o["a0_weight"][0],
                          o["a0_weight"][1], o["weight_norm"], o["n0_density"],
                          o["order_param_sq"], o["zmax_density"], r["tilt_identity_error"]])
        for radius, dens in zip(r["radial"]["r"], r["radial"]["density"]):
            prof.append(key + [radius, dens])
    return {"observables.csv": (obs_header, obs),
            "weight_profile.csv": (["mu", "lambda", "beta", "V", "r", "density"], prof)}


def quasi_average_tables(records):
    long_rows = [[r["V"], r["lambda"], r["order_param"], r["n0_density"]] for r in records]
    vols = sorted({r["V"] for r in records})
    lams = sorted({r["lambda"] for r in records}, reverse=True)
    lookup = {(r["V"], r["lambda"]): r["order_param"] for r in records}
    matrix = [[V] + [lookup.get((V, lam), "") for lam in lams] for V in vols]
    header = ["V"] + [f"lambda={lam!r}" for lam in lams]
    return {"quasi_average.csv": (["V", "lambda", "order_param", "n0_density"], long_rows),
            "quasi_average_matrix.csv": (header, matrix)}


def magnet_tables(records):
    thermo, dist = [], []
    for r in records:
        for i, B in enumerate(r["B"]):
            thermo.append([r["sites"], B, r["m"][i], r["g"][i], r["m2"][i]])
            for M, mass in zip(r["m_values"], r["masses"][i]):
                dist.append([r["sites"], B, M, mass])
    return {"magnet.csv": (["sites", "B", "m", "g", "m2"], thermo),
            "magnet_distribution.csv": (["sites", "B", "M", "mass"], dist)}


def griffiths_tables(records):
    out = {}
    for r in records:
        header = ["y"] + [f"f_{n}" for n in r["ns"]] + ["f_extrapolated"]
        rows = []
        for j, y in enumerate(r["y"]):
            rows.append([y] + [c[j] for c in r["f_n"]] + [r["f"][j]])
        out["rate_function.csv"] = (header, rows)
        out["tails.csv"] = (["n", "tail", "epsilon"],
                            [[n, t, r["epsilon"]] for n, t in zip(r["ns"], r["tails"])])
        out["derivatives.csv"] = (
            ["a_minus", "a_plus", "err_minus", "err_plus", "monotone", "convex", "slope", "c_fit"],
            [[r["a_minus"], r["a_plus"], r["err_minus"], r["err_plus"], r["monotone"],
              all(r["convex"]), r["slope"], r["c_fit"]]])
    return out


def pathological_tables(records):
    header = ["V", "beta_lambda", "normalization_exact", "normalization_numeric",
              "second_moment", "tilted_mean"]
    rows = [[r[k] for k in header] for r in records]
    return {"pathological.csv": (header, rows)}


TABLES = {
    "audit": audit_tables,
    "sweep": audit_tables,
    "weights": weight_tables,
    "quasi-average": quasi_average_tables,
    "magnet": magnet_tables,
    "griffiths": griffiths_tables,
    "pathological": pathological_tables,
}


def summary_text(archive: ResultArchive) -> str:
    """Plain-text summary. Contains no timestamp so reruns reproduce it exactly."""
    lines = [f"run: {archive.run_id}", f"kind: {archive.kind}",
             f"config_hash: {archive.config_hash}", f"points: {len(archive.records)}"]
    if archive.kind in ("audit", "sweep"):
        s = archive.audit_summary()
        lines.append(f"audit checks passed: {s['checks_passed']}/{s['checks_total']}")
        if s["failed_points"]:
            lines.append(f"failed points: {len(s['failed_points'])}")
            for i in s["failed_points"]:
                r = archive.records[i]
                bad = [c["id"] for c in r["audit"] if not c["passed"]]
                lines.append(f"  point {i}: {', '.join(bad)}")
        lines.append("verdict: " + ("FAIL" if s["failed_points"] else "PASS"))
    elif archive.kind == "pathological":
        for r in archive.records:
            lines.append(f"V={r['V']!r} beta_lambda={r['beta_lambda']!r}: "
                         f"normalization={r['normalization_numeric']!r} "
                         f"second_moment={r['second_moment']!r} tilted_mean={r['tilted_mean']!r}")
    elif archive.kind == "magnet":
        for r in archive.records:
            for B, m, m2 in zip(r["B"], r["m"], r["m2"]):
                lines.append(f"sites={r['sites']} B={B!r}: m={m!r} m2={m2!r}")
    elif archive.kind == "griffiths":
        for r in archive.records:
            lines.append(f"a_minus={r['a_minus']!r} (+-{r['err_minus']!r}) "
                         f"a_plus={r['a_plus']!r} (+-{r['err_plus']!r})")
            lines.append(f"tail slope={r['slope']!r} c_fit={r['c_fit']!r}")
    elif archive.kind == "quasi-average":
        for r in archive.records:
            lines.append(f"V={r['V']!r} lambda={r['lambda']!r}: order_param={r['order_param']!r}")
    elif archive.kind == "weights":
        for r in archive.records:
            o = r["observables"]
            lines.append(f"V={r['params']['volume']!r} lambda={r['params']['lambda']!r}: "
                         f"n0={o['n0']!r} n0_weight={o['n0_weight']!r} "
                         f"weight_norm={o['weight_norm']!r}")
    return "\n".join(lines) + "\n"


def write_outputs(archive: ResultArchive, out: str | Path, formats=("csv", "json", "text")) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        for name, (header, rows) in TABLES[archive.kind](archive.records).items():
            p = out / name
            p.write_text(render_csv(header, rows), encoding="utf-8")
            written.append(p)
    if "json" in formats:
        p = out / "archive.json"
        archive.save(p)
        cfg = out / "config.json"
        cfg.write_text(json.dumps(archive.config, indent=2, sort_keys=True) + "\n")
        written += [p, cfg]
    if "text" in formats:
        p = out / "summary.txt"
        p.write_text(summary_text(archive))
        written.append(p)
    return written
