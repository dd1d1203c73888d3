"""Experiment runner: JSON-configured studies writing CSV, JSON and SVG.

Subcommands::

    aniso-hybrid run --config cfg.json --out results/ [--threads N] [--seed S]
    aniso-hybrid dump-matrix --model p|ap|apl --nx 250 --nz 250 [--iota 150] \\
        --out system.mtx

The CSV column set is stable (see ``CSV_COLUMNS``); reruns of the same config
with a fixed thread count produce bit-identical CSV output as long as timing
collection is disabled (``"timings": false``, the default).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analysis as an
from . import models as md
from .linalg import SingularSystemError, cond1_estimate, matrix_stats, write_matrix_market
from .mesh import (DOMAIN_A, DOMAIN_B, build_mesh, find_interface_for_eps,
                   split_at_interface)
from .problems import EpsProfile, make_setup

__all__ = ["main", "run_study", "load_config", "CSV_COLUMNS"]

THREADS_ENV = "ANISO_HYBRID_THREADS"

CSV_COLUMNS = (
    "study", "model", "nx", "nz", "iota", "eps_iota", "eps_min", "eps_max",
    "rows", "nnz", "cond_estimate", "rel_l2", "rel_h1",
    "xi2_dx", "xi2_dz", "ess_distance", "solve_seconds", "status",
)

STUDIES = ("solve", "convergence", "interface-scan", "conditioning",
           "efficiency", "theorem-fits")

_DOMAINS = {"a": DOMAIN_A, "b": DOMAIN_B}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


_TOP_KEYS = {"study", "setup", "meshes", "models", "interface",
             "quadrature_order", "plateau_tol", "eps_sweep",
             "iota_candidates", "eps_targets", "timings"}
_SETUP_KEYS = {"name", "domain", "profile", "eps_min", "eps_max", "r"}
_IFACE_KEYS = {"iota", "eps_target", "omega2_fraction"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def load_config(path: str) -> dict:
    """Parse and validate an experiment config, filling defaults."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top-level config must be an object")
    _reject_unknown(raw, _TOP_KEYS, "config")

    study = raw.get("study")
    if study not in STUDIES:
        raise ConfigError(f"study must be one of {STUDIES}, got {study!r}")

    setup = dict(raw.get("setup", {}))
    _reject_unknown(setup, _SETUP_KEYS, "setup")
    setup.setdefault("name", "a")
    setup.setdefault("domain", "b")
    setup.setdefault("profile", "tanh")
    setup.setdefault("eps_min", 1e-8)
    setup.setdefault("eps_max", 1.0)
    setup.setdefault("r", 30.0)
    if setup["domain"] not in _DOMAINS:
        raise ConfigError(f"setup.domain must be one of {sorted(_DOMAINS)}")
    if setup["profile"] not in ("tanh", "constant"):
        raise ConfigError("setup.profile must be 'tanh' or 'constant'")

    meshes = raw.get("meshes")
    if not meshes:
        raise ConfigError("meshes must be a non-empty list")
    norm_meshes = []
    for m in meshes:
        if isinstance(m, dict) and "cells" in m and set(m) == {"cells"}:
            n = int(m["cells"])
            norm_meshes.append((n - 1, n - 1))
        elif isinstance(m, dict) and set(m) == {"nx", "nz"}:
            norm_meshes.append((int(m["nx"]), int(m["nz"])))
        elif isinstance(m, int):
            norm_meshes.append((m - 1, m - 1))
        else:
            raise ConfigError(
                f"mesh entry {m!r} must be an integer cell count, "
                "{'cells': N} or {'nx': .., 'nz': ..}")
    if any(nx < 1 or nz < 1 for nx, nz in norm_meshes):
        raise ConfigError("meshes must have at least one interior node")

    models = raw.get("models", ["APL"] if study in
                     ("convergence", "interface-scan") else ["P", "AP", "APL"])
    for kind in models:
        if kind not in ("P", "AP", "APL", "L1D"):
            raise ConfigError(f"unknown model {kind!r}")

    iface = dict(raw.get("interface", {"eps_target": 1e-6}))
    _reject_unknown(iface, _IFACE_KEYS, "interface")
    if len(iface) != 1:
        raise ConfigError("interface must specify exactly one of "
                          f"{sorted(_IFACE_KEYS)}")

    cfg = {
        "study": study,
        "setup": setup,
        "meshes": norm_meshes,
        "models": list(models),
        "interface": iface,
        "quadrature_order": int(raw.get("quadrature_order", 3)),
        "plateau_tol": float(raw.get("plateau_tol", 0.10)),
        "eps_sweep": list(raw.get("eps_sweep",
                                  [1e-2, 1e-6, 1e-10, 1e-14, 1e-18])),
        "iota_candidates": raw.get("iota_candidates"),
        "eps_targets": raw.get("eps_targets"),
        "timings": bool(raw.get("timings", False)),
    }
    if cfg["quadrature_order"] not in (1, 2, 3, 4, 5):
        raise ConfigError("quadrature_order must be in 1..5")
    return cfg


def _make_profile(setup_cfg: dict) -> EpsProfile:
    if setup_cfg["profile"] == "constant":
        return EpsProfile.constant(setup_cfg["eps_min"])
    return EpsProfile.tanh_profile(setup_cfg["eps_min"], setup_cfg["eps_max"],
                                   setup_cfg["r"])


def _make_setup(setup_cfg: dict, eps: EpsProfile | None = None):
    eps = eps or _make_profile(setup_cfg)
    domain = _DOMAINS[setup_cfg["domain"]]
    return make_setup(setup_cfg["name"], domain, eps), domain


def _resolve_iota(iface: dict, mesh, eps: EpsProfile) -> int:
    if "iota" in iface:
        return int(iface["iota"])
    if "eps_target" in iface:
        return find_interface_for_eps(mesh, eps, float(iface["eps_target"]))
    frac = float(iface["omega2_fraction"])
    return int(round(frac * (mesh.nz + 1)))


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf"
    return np.format_float_scientific(v, unique=True)


def _row(**kw) -> dict:
    row = {c: "" for c in CSV_COLUMNS}
    row.update(kw)
    if not row["status"]:
        row["status"] = "ok"
    return row


def _solve_point(cfg, nx, nz, kind, with_cond=False, iota=None):
    """Solve one (mesh, model) point; never raises for singular systems."""
    setup, domain = _make_setup(cfg["setup"])
    eps = setup.eps
    mesh = build_mesh(domain, nx, nz)
    n = cfg["quadrature_order"]
    split = None
    eps_iota = ""
    if kind == "APL":
        iota = iota if iota is not None else _resolve_iota(cfg["interface"], mesh, eps)
        split = split_at_interface(mesh, iota)
        eps_iota = float(eps(split.z_iota))
    base = dict(study=cfg["study"], model=kind, nx=nx, nz=nz,
                iota=iota if kind == "APL" else "",
                eps_iota=eps_iota, eps_min=eps.eps_min, eps_max=eps.eps_max)
    try:
        t0 = time.perf_counter()
        field = md.solve_model(kind, mesh, setup, split=split, n=n)
        seconds = time.perf_counter() - t0
        rep = an.error_norms(field, setup, n=n)
    except SingularSystemError as exc:
        return _row(**base, status=f"failed:{exc.__class__.__name__}")
    row = _row(**base, rows=field.stats.get("rows", ""),
               nnz=field.stats.get("nnz", ""),
               rel_l2=rep.rel_l2, rel_h1=rep.rel_h1)
    if cfg["timings"]:
        row["solve_seconds"] = seconds
    if with_cond:
        builders = {"P": lambda: md.build_p_system(mesh, setup, n=n),
                    "AP": lambda: md.build_ap_system(mesh, setup, n=n),
                    "APL": lambda: md.build_apl_system(mesh, split, setup, n=n)}
        system, _ = builders[kind]()
        row["cond_estimate"] = cond1_estimate(system.matrix, equilibrated=True)
    return row


def _study_solve(cfg, pool):
    points = [(nx, nz, kind) for nx, nz in cfg["meshes"]
              for kind in cfg["models"]]
    return list(pool.map(lambda p: _solve_point(cfg, *p), points)), {}


def _study_efficiency(cfg, pool):
    cfg = dict(cfg, timings=True)
    rows, _ = _study_solve(cfg, pool)
    return rows, {}


def _study_convergence(cfg, pool):
    rows, _ = _study_solve(cfg, pool)
    summary = {}
    for kind in cfg["models"]:
        pairs = [(build_mesh(_DOMAINS[cfg["setup"]["domain"]], r["nx"], r["nz"]).h,
                  float(r["rel_h1"]))
                 for r in rows if r["model"] == kind and r["status"] == "ok"]
        if len(pairs) >= 2:
            summary[f"eoc_{kind}"] = an.eoc(pairs)
    return rows, summary


def _scan_candidates(cfg, mesh, eps):
    if cfg["iota_candidates"]:
        return [int(i) for i in cfg["iota_candidates"]]
    targets = cfg["eps_targets"] or np.logspace(
        np.log10(eps.eps_max) - 1.0,
        np.log10(max(eps.eps_min * 10.0, 1e-30)), 12).tolist()
    cands = []
    for tgt in targets:
        i = find_interface_for_eps(mesh, eps, float(tgt))
        if i not in cands:
            cands.append(i)
    return cands


def _study_interface_scan(cfg, pool):
    setup, domain = _make_setup(cfg["setup"])
    eps = setup.eps
    rows, summary = [], {}
    for nx, nz in cfg["meshes"]:
        mesh = build_mesh(domain, nx, nz)
        cands = _scan_candidates(cfg, mesh, eps)
        scan = an.interface_scan(mesh, setup, cands,
                                 plateau_tol=cfg["plateau_tol"],
                                 n=cfg["quadrature_order"])
        for iota, e_i, err in zip(scan.iotas, scan.eps_iotas, scan.rel_h1s):
            rows.append(_row(study=cfg["study"], model="APL", nx=nx, nz=nz,
                             iota=iota, eps_iota=e_i, eps_min=eps.eps_min,
                             eps_max=eps.eps_max, rel_h1=err))
        summary[f"eps_star_{nx}x{nz}"] = scan.eps_star
    return rows, summary


def _study_conditioning(cfg, pool):
    rows = []
    for em in cfg["eps_sweep"]:
        sub = dict(cfg)
        sub["setup"] = dict(cfg["setup"], eps_min=float(em))
        if "eps_target" not in cfg["interface"]:
            sub["interface"] = cfg["interface"]
        else:
            sub["interface"] = {"eps_target": 10.0 * float(em)}
        points = [(nx, nz, kind) for nx, nz in cfg["meshes"]
                  for kind in cfg["models"]]
        rows.extend(pool.map(
            lambda p: _solve_point(sub, *p, with_cond=True), points))
    return rows, {}


def _study_theorem_fits(cfg, pool):
    setup, domain = _make_setup(cfg["setup"])
    eps = setup.eps
    n = cfg["quadrature_order"]
    rows, summary = [], {}
    for nx, nz in cfg["meshes"]:
        mesh = build_mesh(domain, nx, nz)
        cands = _scan_candidates(cfg, mesh, eps)
        sdx, sdz, t1 = an.theorem1_fit(mesh, setup, cands, n=n)
        s2, t2 = an.theorem2_fit(mesh, setup, cands, n=n)
        for (iota, e_i, ndx, ndz), (_, _, d) in zip(t1, t2):
            rows.append(_row(study=cfg["study"], model="AP/APL", nx=nx, nz=nz,
                             iota=iota, eps_iota=e_i, eps_min=eps.eps_min,
                             eps_max=eps.eps_max, xi2_dx=ndx, xi2_dz=ndz,
                             ess_distance=d))
        summary[f"slope_xi2_dx_{nx}x{nz}"] = sdx
        summary[f"slope_xi2_dz_{nx}x{nz}"] = sdz
        summary[f"slope_ess_{nx}x{nz}"] = s2
    return rows, summary


_RUNNERS = {
    "solve": _study_solve,
    "convergence": _study_convergence,
    "interface-scan": _study_interface_scan,
    "conditioning": _study_conditioning,
    "efficiency": _study_efficiency,
    "theorem-fits": _study_theorem_fits,
}


def _write_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in CSV_COLUMNS) + "\n")


def _write_plot(path, cfg, rows) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    study = cfg["study"]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ok = [r for r in rows if r["status"] == "ok"]
    try:
        if study in ("solve", "convergence", "efficiency"):
            for kind in sorted({r["model"] for r in ok}):
                pts = [(build_mesh(_DOMAINS[cfg["setup"]["domain"]],
                                   r["nx"], r["nz"]).h, float(r["rel_h1"]))
                       for r in ok if r["model"] == kind and r["rel_h1"] != ""]
                if pts:
                    pts.sort()
                    ax.loglog(*zip(*pts), "o-", label=kind)
            ax.set_xlabel("h")
            ax.set_ylabel("relative H1 error")
        elif study == "interface-scan":
            for (nx, nz) in cfg["meshes"]:
                pts = sorted((float(r["eps_iota"]), float(r["rel_h1"]))
                             for r in ok if r["nx"] == nx and r["nz"] == nz)
                if pts:
                    ax.loglog(*zip(*pts), "o-", label=f"{nx+1}x{nz+1} cells")
            ax.set_xlabel("eps(z_iota)")
            ax.set_ylabel("relative H1 error")
        elif study == "conditioning":
            for kind in sorted({r["model"] for r in ok}):
                pts = sorted((float(r["eps_min"]), float(r["cond_estimate"]))
                             for r in ok
                             if r["model"] == kind and r["cond_estimate"] != "")
                if pts:
                    ax.loglog(*zip(*pts), "o-", label=kind)
            ax.set_xlabel("eps_min")
            ax.set_ylabel("1-norm condition estimate")
        else:  # theorem-fits
            pts_dx = sorted((float(r["eps_iota"]), float(r["xi2_dx"]))
                            for r in ok if r["xi2_dx"] != "")
            pts_dz = sorted((float(r["eps_iota"]), float(r["xi2_dz"]))
                            for r in ok if r["xi2_dz"] != "")
            pts_d = sorted((float(r["eps_iota"]), float(r["ess_distance"]))
                           for r in ok if r["ess_distance"] != "")
            for pts, lbl in ((pts_dx, "xi2 dx"), (pts_dz, "xi2 dz"),
                             (pts_d, "AP-APL distance")):
                if pts:
                    ax.loglog(*zip(*pts), "o-", label=lbl)
            ax.set_xlabel("eps(z_iota)")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)


def run_study(cfg: dict, out_dir: str, threads: int = 1) -> int:
    """Run one study, writing results.csv, config-echo.json and a plot."""
    os.makedirs(out_dir, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows, summary = _RUNNERS[cfg["study"]](cfg, pool)
    _write_csv(os.path.join(out_dir, "results.csv"), rows)
    echo = dict(cfg)
    echo["meshes"] = [list(m) for m in cfg["meshes"]]
    if summary:
        echo["summary"] = summary
    with open(os.path.join(out_dir, "config-echo.json"), "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_plot(os.path.join(out_dir, f"{cfg['study']}.svg"), cfg, rows)
    mandatory_failed = any(r["status"] != "ok" for r in rows) \
        and cfg["study"] != "conditioning"
    return 1 if mandatory_failed else 0


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    threads = args.threads or int(os.environ.get(THREADS_ENV, "1"))
    if args.seed is not None:
        np.random.seed(args.seed)
    return run_study(cfg, args.out, threads=threads)


def _cmd_dump_matrix(args) -> int:
    kind = args.model.upper()
    domain = _DOMAINS[args.domain]
    eps = (EpsProfile.constant(args.eps_min) if args.profile == "constant"
           else EpsProfile.tanh_profile(args.eps_min, args.eps_max, args.r))
    setup, _ = _make_setup({"name": args.setup, "domain": args.domain,
                            "profile": args.profile, "eps_min": args.eps_min,
                            "eps_max": args.eps_max, "r": args.r}, eps)
    mesh = build_mesh(domain, args.nx, args.nz)
    if kind == "P":
        system, _ = md.build_p_system(mesh, setup)
    elif kind == "AP":
        system, _ = md.build_ap_system(mesh, setup)
    else:
        if args.iota is None:
            print("dump-matrix: --iota is required for the apl model",
                  file=sys.stderr)
            return 2
        split = split_at_interface(mesh, args.iota)
        system, _ = md.build_apl_system(mesh, split, setup)
    stats = matrix_stats(system.matrix)
    write_matrix_market(args.out, system.matrix,
                        comment=f"{kind} system nx={args.nx} nz={args.nz}")
    print(f"wrote {args.out}: {stats['rows']} rows, {stats['nnz']} stored entries")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aniso-hybrid",
        description="Anisotropic elliptic solver experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured study")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_dump = sub.add_parser("dump-matrix",
                            help="assemble one system and write MatrixMarket")
    p_dump.add_argument("--model", required=True, choices=["p", "ap", "apl"])
    p_dump.add_argument("--nx", type=int, required=True)
    p_dump.add_argument("--nz", type=int, required=True)
    p_dump.add_argument("--iota", type=int, default=None)
    p_dump.add_argument("--out", required=True)
    p_dump.add_argument("--setup", default="a", choices=["a", "b", "zero-fluct"])
    p_dump.add_argument("--domain", default="b", choices=["a", "b"])
    p_dump.add_argument("--profile", default="tanh",
                        choices=["tanh", "constant"])
    p_dump.add_argument("--eps-min", dest="eps_min", type=float, default=1e-8)
    p_dump.add_argument("--eps-max", dest="eps_max", type=float, default=1.0)
    p_dump.add_argument("--r", type=float, default=30.0)
    p_dump.set_defaults(func=_cmd_dump_matrix)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
