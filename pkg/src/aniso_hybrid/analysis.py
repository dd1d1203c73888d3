"""Error norms, convergence orders, slope fits and the interface scan."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import gauss_rule
from .mesh import TensorMesh, split_at_interface
from .models import (SolutionField, derive_xi2, ess_distance, eval_grid,
                     grid_norms, solve_model)
from .problems import ManufacturedProblem

__all__ = [
    "ErrorReport",
    "ScanResult",
    "error_norms",
    "eoc",
    "plateau_star",
    "interface_scan",
    "theorem1_fit",
    "theorem2_fit",
]


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors of one solve against the manufactured solution."""

    model: str
    h: float
    rel_l2: float
    rel_h1: float
    eps_min: float
    eps_max: float
    eps_iota: float | None = None


@dataclass(frozen=True)
class ScanResult:
    """Interface-position sweep: per-candidate errors and the plateau edge.

    ``eps_star`` is the largest scanned interface anisotropy whose error is
    within the plateau tolerance of the minimum over all candidates.
    """

    iotas: tuple[int, ...]
    eps_iotas: tuple[float, ...]
    rel_h1s: tuple[float, ...]
    eps_star: float
    iota_star: int
    plateau_tol: float


def _exact_at_quad(mesh: TensorMesh, setup: ManufacturedProblem, n: int):
    t = gauss_rule(n).points
    xq = mesh.x_nodes[:-1, None] + (t[None, :] + 1.0) * (mesh.dx / 2.0)
    zq = mesh.z_nodes[:-1, None] + (t[None, :] + 1.0) * (mesh.dz / 2.0)
    X = xq[:, :, None, None]
    Z = zq[None, None, :, :]
    shape = (xq.shape[0], n, zq.shape[0], n)
    ue = np.broadcast_to(np.asarray(setup.u_exact(X, Z), float), shape)
    ux = np.broadcast_to(np.asarray(setup.du_dx(X, Z), float), shape)
    uz = np.broadcast_to(np.asarray(setup.du_dz(X, Z), float), shape)
    return ue, ux, uz


def error_norms(field: SolutionField, setup: ManufacturedProblem,
                n: int = 3) -> ErrorReport:
    """Relative L2 and H1 errors by cell-wise Gauss quadrature."""
    mesh = field.mesh
    vals, d_dx, d_dz, w2 = eval_grid(mesh, field.u_node, n=n)
    ue, ux, uz = _exact_at_quad(mesh, setup, n)
    l2_err = np.sqrt(np.sum((vals - ue) ** 2 * w2))
    l2_ref = np.sqrt(np.sum(ue ** 2 * w2))
    h1_err = np.sqrt(np.sum(
        ((vals - ue) ** 2 + (d_dx - ux) ** 2 + (d_dz - uz) ** 2) * w2))
    h1_ref = np.sqrt(np.sum((ue ** 2 + ux ** 2 + uz ** 2) * w2))
    eps_iota = None
    if field.split is not None:
        eps_iota = float(setup.eps(field.split.z_iota))
    return ErrorReport(
        model=field.model, h=mesh.h,
        rel_l2=float(l2_err / l2_ref), rel_h1=float(h1_err / h1_ref),
        eps_min=float(setup.eps.eps_min), eps_max=float(setup.eps.eps_max),
        eps_iota=eps_iota)


def eoc(pairs) -> float:
    """Least-squares slope of log(error) versus log(h)."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("eoc needs at least two (h, error) points")
    h = np.array([p[0] for p in pairs], dtype=float)
    e = np.array([p[1] for p in pairs], dtype=float)
    if np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("eoc needs positive mesh sizes and errors")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def _loglog_slope(x, y) -> float:
    return eoc(zip(x, y))


def plateau_star(eps_iotas, errs, iotas, plateau_tol: float):
    """Plateau edge: the largest interface anisotropy whose error is within
    ``(1 + plateau_tol)`` of the sweep minimum.  Returns (eps_star, iota_star).
    """
    best = min(errs)
    ok = [(e_i, i) for e_i, err, i in zip(eps_iotas, errs, iotas)
          if err <= (1.0 + plateau_tol) * best]
    return max(ok)


def interface_scan(mesh: TensorMesh, setup: ManufacturedProblem,
                   iota_candidates, plateau_tol: float = 0.10,
                   n: int = 3) -> ScanResult:
    """Sweep the interface node and locate the plateau edge.

    Solves the hybrid model at each candidate and reports the largest
    interface anisotropy whose relative H1 error stays within
    ``(1 + plateau_tol)`` of the sweep minimum.
    """
    iotas = [int(i) for i in iota_candidates]
    if not iotas:
        raise ValueError("interface_scan needs at least one candidate")
    eps_iotas, errs = [], []
    for iota in iotas:
        split = split_at_interface(mesh, iota)
        field = solve_model("APL", mesh, setup, split=split, n=n)
        rep = error_norms(field, setup, n=n)
        eps_iotas.append(float(setup.eps(split.z_iota)))
        errs.append(rep.rel_h1)
    eps_star, iota_star = plateau_star(eps_iotas, errs, iotas, plateau_tol)
    return ScanResult(iotas=tuple(iotas), eps_iotas=tuple(eps_iotas),
                      rel_h1s=tuple(errs), eps_star=eps_star,
                      iota_star=iota_star, plateau_tol=plateau_tol)


def theorem1_fit(mesh: TensorMesh, setup: ManufacturedProblem,
                 iota_sweep, n: int = 3):
    """Scaling of the lifted lower-fluctuation gradient with the interface
    anisotropy, from a single AP solve.

    Returns ``(slope_dx, slope_dz, table)`` where ``table`` rows are
    ``(iota, eps_iota, norm_dx, norm_dz)`` and the slopes are log-log
    least-squares fits against ``eps_iota``.
    """
    ap = solve_model("AP", mesh, setup, n=n)
    rows = []
    for iota in iota_sweep:
        split = split_at_interface(mesh, int(iota))
        xi2 = derive_xi2(ap, split)
        zc = np.arange(split.iota)
        grid = np.zeros_like(ap.fluct_node)
        grid[:, :split.iota + 1] = xi2
        _, ndx, ndz = grid_norms(mesh, grid, n=n, zcells=zc)
        rows.append((int(iota), float(setup.eps(split.z_iota)), ndx, ndz))
    eps_vals = [r[1] for r in rows]
    if max(eps_vals) / min(eps_vals) < 1e3:
        raise ValueError("iota sweep must span at least three decades of eps")
    slope_dx = _loglog_slope(eps_vals, [r[2] for r in rows])
    slope_dz = _loglog_slope(eps_vals, [r[3] for r in rows])
    return slope_dx, slope_dz, rows


def theorem2_fit(mesh: TensorMesh, setup: ManufacturedProblem,
                 iota_sweep, n: int = 3):
    """Scaling of the AP-to-hybrid distance with the interface anisotropy.

    Returns ``(slope, table)``; ``table`` rows are ``(iota, eps_iota,
    distance)`` with the distance measured in the seminorms the hybrid error
    estimate controls.
    """
    ap = solve_model("AP", mesh, setup, n=n)
    rows = []
    for iota in iota_sweep:
        split = split_at_interface(mesh, int(iota))
        apl = solve_model("APL", mesh, setup, split=split, n=n)
        d = ess_distance(ap, apl, split, n=n)
        rows.append((int(iota), float(setup.eps(split.z_iota)), d))
    eps_vals = [r[1] for r in rows]
    if max(eps_vals) / min(eps_vals) < 1e3:
        raise ValueError("iota sweep must span at least three decades of eps")
    slope = _loglog_slope(eps_vals, [r[2] for r in rows])
    return slope, rows
