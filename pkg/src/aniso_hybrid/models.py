"""Build, solve and reconstruct the three discrete formulations.

* P: the direct singular-perturbation discretization, one unknown per
  non-Dirichlet node.
* AP: the reformulated system with a mean/fluctuation split and a Lagrange
  multiplier enforcing the zero-z-mean constraint on the fluctuation.
* APL: the hybrid model coupling the AP fluctuation on the upper sub-domain
  with the limit (mean) model below the interface; the fluctuation below the
  interface is replaced by its interface trace.

Solutions are reconstructed onto the full nodal grid so that all models can
be compared with the same quadrature-based norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assembly as asm
from .basis import gauss_rule
from .linalg import BlockSystem, compose_blocks, lu_solve, sparse_add
from .mesh import SubdomainSplit, TensorMesh
from .problems import ManufacturedProblem

__all__ = [
    "MODEL_KINDS",
    "SolutionField",
    "build_p_system",
    "build_ap_system",
    "build_apl_system",
    "solve_model",
    "solve_limit_1d",
    "derive_xi2",
    "eval_grid",
    "grid_norms",
    "h1_distance",
    "ess_distance",
]

MODEL_KINDS = ("P", "AP", "APL", "L1D")


@dataclass
class SolutionField:
    """A solved model reconstructed on the full nodal grid.

    ``u_node`` has shape (nx+2, nz+2) with exactly zero Dirichlet rows.
    ``mean_node`` (nx+2,) and ``fluct_node`` are the components where the
    model has them (None for the P model).  ``trace_row`` is the interface
    fluctuation trace used to fill the lower sub-domain of an APL solve.
    """

    model: str
    mesh: TensorMesh
    u_node: np.ndarray
    mean_node: np.ndarray | None = None
    fluct_node: np.ndarray | None = None
    multiplier: np.ndarray | None = None
    trace_row: np.ndarray | None = None
    split: SubdomainSplit | None = None
    stats: dict = field(default_factory=dict)


def build_p_system(mesh: TensorMesh, setup: ManufacturedProblem, n: int = 3):
    """Direct discretization ``(A_xf + A_z) delta = F``; returns (system, rhs)."""
    a = sparse_add(asm.assemble_form("a_xf", mesh, setup, n=n),
                   asm.assemble_form("a_z", mesh, setup, n=n))
    system = compose_blocks([[a]], ("fluct",), (a.shape[0],))
    rhs = asm.assemble_rhs_fluct(mesh, setup, "P", n=n)
    return system, rhs


def build_ap_system(mesh: TensorMesh, setup: ManufacturedProblem, n: int = 3):
    """Reformulated 3x3 block system; returns (system, rhs).

    Layout: [[A_xa, (1/L_z) C_a, 0], [C_f, A_xf + A_z, B_l], [0, B_c, 0]],
    unknowns (mean, fluctuation, multiplier).
    """
    lz = mesh.domain.lz
    a_xa = asm.assemble_form("a_xa", mesh, setup, n=n)
    a_f = sparse_add(asm.assemble_form("a_xf", mesh, setup, n=n),
                     asm.assemble_form("a_z", mesh, setup, n=n))
    c_a = asm.assemble_form("c_a", mesh, setup, n=n)
    c_f = asm.assemble_form("c_f", mesh, setup, n=n)
    b_l = asm.assemble_form("b_l", mesh, setup, n=n)
    b_c = asm.assemble_form("b_c", mesh, setup, n=n)
    n_f = a_f.shape[0]
    system = compose_blocks(
        [[a_xa, c_a / lz, None],
         [c_f, a_f, b_l],
         [None, b_c, None]],
        ("mean", "fluct", "lagrange"), (mesh.nx, n_f, mesh.nx))
    rhs = np.concatenate([
        asm.assemble_rhs_mean(mesh, setup, n=n),
        asm.assemble_rhs_fluct(mesh, setup, "AP", n=n),
        np.zeros(mesh.nx)])
    return system, rhs


def build_apl_system(mesh: TensorMesh, split: SubdomainSplit,
                     setup: ManufacturedProblem, n: int = 3):
    """Hybrid system coupling the fluctuation on the upper sub-domain with
    the limit model below; returns (system, rhs).

    The mean-equation and constraint blocks pick up interface-trace
    contributions from the lower sub-domain (the expanded trace matrices),
    so the constraint reads: integral of u'_1 over the upper z-range plus
    the trace times the lower sub-domain length equals zero.
    """
    if split is None or split.mesh is not mesh:
        raise ValueError("build_apl_system requires a split of the same mesh")
    lz = mesh.domain.lz
    a_xa = asm.assemble_form("a_xa", mesh, setup, n=n)
    a_f1 = sparse_add(asm.assemble_form("a_xf", mesh, setup, split, 1, n=n),
                      asm.assemble_form("a_z", mesh, setup, split, 1, n=n))
    c_a1 = asm.assemble_form("c_a", mesh, setup, split, 1, n=n)
    c_a2 = asm.assemble_expanded_trace("c_a", mesh, split, setup, n=n)
    c_f1 = asm.assemble_form("c_f", mesh, setup, split, 1, n=n)
    b_l1 = asm.assemble_form("b_l", mesh, setup, split, 1, n=n)
    b_c1 = asm.assemble_form("b_c", mesh, setup, split, 1, n=n)
    b_c2 = asm.assemble_expanded_trace("b_c", mesh, split, setup, n=n)
    n_f = a_f1.shape[0]
    system = compose_blocks(
        [[a_xa, sparse_add(c_a1, c_a2) / lz, None],
         [c_f1, a_f1, b_l1],
         [None, sparse_add(b_c1, b_c2), None]],
        ("mean", "fluct", "lagrange"), (mesh.nx, n_f, mesh.nx))
    rhs = np.concatenate([
        asm.assemble_rhs_mean(mesh, setup, n=n),
        asm.assemble_rhs_fluct(mesh, setup, "APL", split, n=n),
        np.zeros(mesh.nx)])
    return system, rhs


def _mean_to_grid(mesh: TensorMesh, alpha: np.ndarray) -> np.ndarray:
    mean = np.zeros(mesh.nx + 2)
    mean[1:mesh.nx + 1] = alpha
    return mean


def solve_model(kind: str, mesh: TensorMesh, setup: ManufacturedProblem,
                split: SubdomainSplit | None = None, n: int = 3,
                compute_cond: bool = False) -> SolutionField:
    """Solve one model and reconstruct the nodal field.

    ``stats`` carries rows/nnz of the composed system, and a 1-norm condition
    estimate (after max-abs scaling) when ``compute_cond`` is set.
    """
    from .linalg import cond1_estimate, matrix_stats

    nx, nz = mesh.nx, mesh.nz
    if kind == "L1D":
        alpha = solve_limit_1d(mesh, setup, n=n)
        mean = _mean_to_grid(mesh, alpha[1:nx + 1])
        u = np.repeat(mean[:, None], nz + 2, axis=1)
        return SolutionField(model=kind, mesh=mesh, u_node=u, mean_node=mean)
    if kind == "P":
        system, rhs = build_p_system(mesh, setup, n=n)
    elif kind == "AP":
        system, rhs = build_ap_system(mesh, setup, n=n)
    elif kind == "APL":
        system, rhs = build_apl_system(mesh, split, setup, n=n)
    else:
        raise ValueError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")

    sol = lu_solve(system.matrix, rhs)
    stats = matrix_stats(system.matrix)
    if compute_cond:
        stats["cond_estimate"] = cond1_estimate(system.matrix, equilibrated=True)

    u = np.zeros((nx + 2, nz + 2))
    if kind == "P":
        u[1:nx + 1, :] = system.extract(sol, "fluct").reshape(nx, nz + 2)
        return SolutionField(model=kind, mesh=mesh, u_node=u, stats=stats)

    mean = _mean_to_grid(mesh, system.extract(sol, "mean"))
    gamma = system.extract(sol, "lagrange")
    fluct = np.zeros((nx + 2, nz + 2))
    if kind == "AP":
        fluct[1:nx + 1, :] = system.extract(sol, "fluct").reshape(nx, nz + 2)
        u = mean[:, None] + fluct
        return SolutionField(model=kind, mesh=mesh, u_node=u, mean_node=mean,
                             fluct_node=fluct, multiplier=gamma, stats=stats)

    beta = system.extract(sol, "fluct").reshape(nx, split.mz)
    fluct[1:nx + 1, split.iota:] = beta
    trace = fluct[:, split.iota].copy()
    fluct[:, :split.iota] = trace[:, None]
    u = mean[:, None] + fluct
    return SolutionField(model=kind, mesh=mesh, u_node=u, mean_node=mean,
                         fluct_node=fluct, multiplier=gamma, trace_row=trace,
                         split=split, stats=stats)


def solve_limit_1d(mesh: TensorMesh, setup: ManufacturedProblem,
                   n: int = 3) -> np.ndarray:
    """Solve the 1D limit problem for the mean; returns all x-node values."""
    a_xa = asm.assemble_form("a_xa", mesh, setup, n=n)
    rhs = asm.assemble_rhs_mean(mesh, setup, n=n)
    alpha = lu_solve(a_xa, rhs)
    out = np.zeros(mesh.nx + 2)
    out[1:mesh.nx + 1] = alpha
    return out


def derive_xi2(ap_solution: SolutionField, split: SubdomainSplit) -> np.ndarray:
    """Lifted lower-sub-domain fluctuation difference from an AP solve.

    Returns nodal values on the lower sub-domain z-range (shape
    (nx+2, iota+1)): the fluctuation minus its interface-row trace.  The
    interface row is zero by construction.
    """
    if ap_solution.model != "AP":
        raise ValueError("derive_xi2 expects an AP solution")
    fl = ap_solution.fluct_node
    return fl[:, :split.iota + 1] - fl[:, split.iota][:, None]


def eval_grid(mesh: TensorMesh, grid: np.ndarray, n: int = 3,
              zcells: np.ndarray | None = None):
    """Evaluate a nodal bilinear field and its gradient at cell Gauss points.

    Returns ``(vals, d_dx, d_dz, w2)`` with shapes (nxc, n, nzc, n); ``w2``
    is the per-point quadrature weight including the cell Jacobian.
    """
    rule = gauss_rule(n)
    t, w = rule.points, rule.weights
    if zcells is None:
        zcells = np.arange(grid.shape[1] - 1)
    zcells = np.asarray(zcells)
    v = np.vstack([(1.0 - t) / 2.0, (1.0 + t) / 2.0])
    dvx = np.vstack([np.full_like(t, -1.0 / mesh.dx), np.full_like(t, 1.0 / mesh.dx)])
    dvz = np.vstack([np.full_like(t, -1.0 / mesh.dz), np.full_like(t, 1.0 / mesh.dz)])
    g = grid[:, zcells[0]:zcells[-1] + 2] if zcells.size else grid[:, :0]
    corners = np.stack([
        np.stack([g[:-1, :-1], g[:-1, 1:]], axis=0),
        np.stack([g[1:, :-1], g[1:, 1:]], axis=0)], axis=0)  # (2, 2, nxc, nzc)
    vals = np.einsum("pqik,pa,qb->iakb", corners, v, v, optimize=True)
    d_dx = np.einsum("pqik,pa,qb->iakb", corners, dvx, v, optimize=True)
    d_dz = np.einsum("pqik,pa,qb->iakb", corners, v, dvz, optimize=True)
    w2 = np.outer(w, w)[None, :, None, :] * (mesh.dx / 2.0) * (mesh.dz / 2.0)
    return vals, d_dx, d_dz, w2


def grid_norms(mesh: TensorMesh, grid: np.ndarray, n: int = 3,
               zcells: np.ndarray | None = None):
    """L2 norm and the two gradient-component L2 norms of a nodal field."""
    vals, d_dx, d_dz, w2 = eval_grid(mesh, grid, n=n, zcells=zcells)
    l2 = np.sqrt(np.sum(vals ** 2 * w2))
    nx_ = np.sqrt(np.sum(d_dx ** 2 * w2))
    nz_ = np.sqrt(np.sum(d_dz ** 2 * w2))
    return float(l2), float(nx_), float(nz_)


def _region_zcells(mesh: TensorMesh, region, split: SubdomainSplit | None):
    if region == "full":
        return np.arange(mesh.nz + 1)
    if split is None:
        raise ValueError("sub-domain regions require a split")
    if region == "omega1":
        return np.arange(split.iota, mesh.nz + 1)
    if region == "omega2":
        return np.arange(split.iota)
    raise ValueError("region must be 'full', 'omega1' or 'omega2'")


def h1_distance(a: SolutionField, b: SolutionField, region: str = "full",
                split: SubdomainSplit | None = None, n: int = 3) -> float:
    """Full H1 distance of two reconstructed fields over a region."""
    if a.mesh is not b.mesh and (a.mesh.nx != b.mesh.nx or a.mesh.nz != b.mesh.nz):
        raise ValueError("h1_distance requires fields on the same mesh")
    split = split or a.split or b.split
    zc = _region_zcells(a.mesh, region, split)
    l2, dx_, dz_ = grid_norms(a.mesh, a.u_node - b.u_node, n=n, zcells=zc)
    return float(np.sqrt(l2 ** 2 + dx_ ** 2 + dz_ ** 2))


def ess_distance(ap: SolutionField, apl: SolutionField,
                 split: SubdomainSplit, n: int = 3) -> float:
    """Distance in the seminorms controlled by the hybrid error estimate.

    Sum of the x-gradient distance of the means over the full domain and the
    x- and z-gradient distances of the fluctuations over the upper
    sub-domain.
    """
    mesh = ap.mesh
    dmean = (ap.mean_node - apl.mean_node)[:, None] * np.ones(mesh.nz + 2)
    _, mean_dx, _ = grid_norms(mesh, dmean, n=n)
    zc1 = np.arange(split.iota, mesh.nz + 1)
    dfl = ap.fluct_node - apl.fluct_node
    _, fl_dx, fl_dz = grid_norms(mesh, dfl, n=n, zcells=zc1)
    return float(mean_dx + fl_dx + fl_dz)
