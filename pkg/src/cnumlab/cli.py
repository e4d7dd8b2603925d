"""Command-line entry point: ``cnumlab <subcommand> --config <path> [overrides]``.

Exit status: 0 when every audit passes, 2 when an inequality audit fails,
1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import griffiths as gf
from .archive import ArchiveError, ResultArchive, summary_text, write_outputs
from .config import (
    KINDS,
    ConfigError,
    RunConfig,
    gas_from_block,
    load_config,
    suite_points,
    sweep_points,
    truncation_from_block,
)
from .ensemble import audit_point, partition_full
from .magnet import SpinLattice, chain_measure_sequence, sector_spectrum, thermodynamics
from .order import (
    condensate_observables,
    observable_grid,
    order_parameter_point,
    pathological_weight,
    tilt_identity_error,
    weight_full,
)

EXIT_OK, EXIT_USAGE, EXIT_AUDIT = 0, 1, 2


# --------------------------------------------------------------------------
# per-point evaluators (top level so worker processes can pickle them)


def _audit_record(task) -> dict:
    gas, trunc, tol = task
    params = gas_from_block(gas)
    rep = audit_point(params, truncation_from_block(trunc), tol)
    rec = rep.to_dict()
    rec["margin"] = rep.min_margin
    return rec


def _weights_record(task) -> dict:
    gas, trunc, tol = task
    params = gas_from_block(gas)
    basis, bp = truncation_from_block(trunc).bases(params)
    state = partition_full(params, basis)
    grid = observable_grid(params, basis, bp, tol)
    obs = condensate_observables(params, basis, grid, bp, state=state)
    r, dens = weight_full(params, basis, grid, state).radial_marginal()
    return {"params": params.to_dict(), "observables": obs.to_dict(),
            "radial": {"r": [float(x) for x in r], "density": [float(x) for x in dens]},
            "tilt_identity_error": tilt_identity_error(params, bp, grid)}


def _quasi_record(task) -> dict:
    gas, trunc = task
    params = gas_from_block(gas)
    op, nd = order_parameter_point(params, truncation_from_block(trunc))
    return {"V": params.volume, "lambda": params.lam, "order_param": op, "n0_density": nd}


def _magnet_record(task) -> dict:
    lattice_block, sites, B_grid = task
    lat = SpinLattice(d=int(lattice_block["d"]), L=int(sites), s=float(lattice_block["s"]),
                      J=float(lattice_block["J"]), beta=float(lattice_block["beta"]))
    rep = thermodynamics(lat, B_grid, sector_spectrum(lat))
    return {"sites": lat.n_sites, "L": int(sites), "B": [float(b) for b in rep.B],
            "m": rep.m.tolist(), "g": rep.g.tolist(), "m2": rep.m2.tolist(),
            "m_values": rep.m_values.tolist(), "masses": rep.masses.tolist()}


def _pathological_record(task) -> dict:
    V, bl = task
    return pathological_weight(float(V), float(bl)).to_dict()


def _map(fn, tasks, workers: int) -> list:
    """Ordered map; the result order never depends on completion order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _griffiths_sequence(cfg: RunConfig) -> gf.MeasureSequence:
    g = cfg.block("griffiths")
    src = g["source"]
    if src == "coins":
        return gf.coin_sequence(g["ns"], g["bias"])
    if src == "two-point":
        return gf.two_point_sequence(g["ns"])
    if src == "point-mass":
        return gf.point_mass_sequence(g["ns"], g["bias"])
    if src == "magnet":
        lat = cfg.block("lattice")
        B = cfg.block("grids")["B"][0]
        return chain_measure_sequence(g["sizes"], s=lat["s"], J=lat["J"], B=B,
                                      beta=g["beta"], d=lat["d"])
    try:
        return gf.MeasureSequence.from_json(Path(g["path"]).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError([f"griffiths.path: cannot load measure sequence ({exc})"]) from None


def _griffiths_record(cfg: RunConfig) -> dict:
    g = cfg.block("griffiths")
    seq = _griffiths_sequence(cfg)
    y = np.linspace(-g["y_max"], g["y_max"], int(g["n_y"]))
    est = gf.rate_function(seq, y)
    h = tuple(g["h"]) if g["h"] else gf.DEFAULT_H
    der = gf.one_sided_derivatives(est, h)
    conc = gf.concentration_check(seq, der.a_minus, der.a_plus, g["epsilon"])
    return {"ns": [int(n) for n in est.ns], "y": est.y_grid.tolist(),
            "f_n": est.f_n.tolist(), "f": est.f.tolist(), "convex": list(est.convex),
            "a_minus": der.a_minus, "a_plus": der.a_plus,
            "err_minus": der.err_minus, "err_plus": der.err_plus,
            "monotone": der.monotone, "epsilon": float(g["epsilon"]),
            "tails": conc.tails.tolist(), "slope": conc.slope, "c_fit": conc.c_fit}


def run(cfg: RunConfig) -> ResultArchive:
    """Evaluate every point of the configured experiment into a fresh archive."""
    archive = ResultArchive.start(cfg)
    kind = cfg.kind
    tol = float(cfg.block("quadrature")["tol_quad"])
    trunc = cfg.block("truncation")
    w = cfg.workers
    if kind == "audit":
        tasks = [(p["gas"], p["truncation"], tol) for p in suite_points(cfg)]
        archive.extend(_map(_audit_record, tasks, w))
    elif kind == "sweep":
        archive.extend(_map(_audit_record, [(g, trunc, tol) for g in sweep_points(cfg)], w))
    elif kind == "weights":
        archive.extend(_map(_weights_record, [(g, trunc, tol) for g in sweep_points(cfg)], w))
    elif kind == "quasi-average":
        pts = sorted(sweep_points(cfg), key=lambda g: (g["length"], -g["lambda"]))
        archive.extend(_map(_quasi_record, [(g, trunc) for g in pts], w))
    elif kind == "magnet":
        B = cfg.block("grids")["B"]
        tasks = [(cfg.block("lattice"), s, B) for s in cfg.block("grids")["sites"]]
        archive.extend(_map(_magnet_record, tasks, w))
    elif kind == "griffiths":
        archive.append(_griffiths_record(cfg))
    elif kind == "pathological":
        gr = cfg.block("grids")
        tasks = [(V, bl) for V in (gr["V"] or [200.0]) for bl in gr["beta_lambda"]]
        archive.extend(_map(_pathological_record, tasks, w))
    else:  # pragma: no cover - rejected by validation
        raise ConfigError([f"kind: unknown {kind!r}"])
    return archive


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cnumlab", description="Finite-volume c-number substitution laboratory.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--V", type=_floats, help="volumes, comma separated")
        p.add_argument("--mu", type=_floats, help="chemical potentials")
        p.add_argument("--lambda", dest="lam", type=_floats, help="breaking fields")
        p.add_argument("--beta", type=_floats, help="inverse temperatures")
        p.add_argument("--beta-lambda", type=_floats, help="beta*lambda values (pathological)")
        p.add_argument("--sites", type=_ints, help="chain lengths (magnet)")
        p.add_argument("--B", type=_floats, help="magnetic fields (magnet)")
        p.add_argument("--tol-quad", type=float, help="quadrature tolerance")
        p.add_argument("--workers", type=int, help="worker processes (default: $CNUMLAB_WORKERS or 1)")
        p.add_argument("--seed", type=int, help="seed for a randomized audit suite")
    rp = sub.add_parser("report", help="re-render tables and summary from an archive")
    rp.add_argument("--archive", required=True, help="archive.json written by a previous run")
    rp.add_argument("--out", help="output directory (default: the archive's directory)")
    rp.add_argument("--format", choices=("all", "csv", "json", "text"), default="all")
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    return {
        "kind": ns.command,
        "out": ns.out,
        "grids.V": ns.V,
        "grids.mu": ns.mu,
        "grids.lambda": ns.lam,
        "grids.beta": ns.beta,
        "grids.beta_lambda": ns.beta_lambda,
        "grids.sites": ns.sites,
        "grids.B": ns.B,
        "quadrature.tol_quad": ns.tol_quad,
        "workers": ns.workers,
        "seed": ns.seed,
    }


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE

    if ns.command == "report":
        try:
            archive = ResultArchive.load(ns.archive)
        except ArchiveError as exc:
            print(f"cnumlab: {exc}", file=sys.stderr)
            return EXIT_USAGE
        out = Path(ns.out) if ns.out else Path(ns.archive).parent
        formats = ("csv", "json", "text") if ns.format == "all" else (ns.format,)
        write_outputs(archive, out, formats)
        print(summary_text(archive), end="")
        return EXIT_AUDIT if archive.audit_failed else EXIT_OK

    try:
        cfg = load_config(ns.config, _overrides(ns))
        archive = run(cfg)
    except ConfigError as exc:
        print(f"cnumlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_outputs(archive, cfg.out)
    print(summary_text(archive), end="")
    return EXIT_AUDIT if archive.audit_failed else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
