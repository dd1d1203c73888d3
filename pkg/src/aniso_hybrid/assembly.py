"""Sparse assembly of the bilinear forms and right-hand sides.

All matrices are assembled cell-by-cell (vectorized over the whole cell set)
with a tensorized Gauss rule, 3 points per direction by default.  Every local
entry whose basis supports overlap is scattered, including exact zeros, so the
stored nonzero counts are mesh-determined and reproducible.

Dirichlet conditions at x = x_pm are enforced by dof elimination: only the
``nx`` interior x-nodes carry unknowns.  Fluctuation dofs are ordered x-major,
then z (``(i-1)*nk + (k - k0)``); mean and multiplier dofs are the interior
P1 hats in x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import gauss_rule
from .mesh import SubdomainSplit, TensorMesh
from .problems import ManufacturedProblem

__all__ = [
    "FORM_IDS",
    "DofLayout",
    "fluct_layout",
    "assemble_form",
    "assemble_expanded_trace",
    "assemble_rhs_mean",
    "assemble_rhs_fluct",
    "zline_average",
]

#: Catalogue of the bilinear forms.  ``d_iota`` is listed for completeness but
#: never assembled: the interface Neumann datum vanishes in the hybrid model
#: and the two-subdomain view of the AP model is recovered algebraically.
FORM_IDS = ("a_z", "a_xf", "a_xa", "b_l", "b_c", "c_f", "c_a", "d_iota")

_SUBS = ("full", 1, 2)


@dataclass(frozen=True)
class DofLayout:
    """Flat indexing of the fluctuation unknown on a z-node range."""

    nx: int
    k0: int
    k1: int  # inclusive

    @property
    def nk(self) -> int:
        return self.k1 - self.k0 + 1

    @property
    def n_fluct(self) -> int:
        return self.nx * self.nk

    @property
    def n_mean(self) -> int:
        return self.nx

    @property
    def n_lagrange(self) -> int:
        return self.nx

    def fluct_flat(self, i, k):
        return (i - 1) * self.nk + (k - self.k0)


def fluct_layout(mesh: TensorMesh, split: SubdomainSplit | None, sub) -> DofLayout:
    """Fluctuation dof layout for a (sub-)domain."""
    if sub == "full":
        return DofLayout(mesh.nx, 0, mesh.nz + 1)
    if split is None:
        raise ValueError("sub-domain forms require a SubdomainSplit")
    if sub == 1:
        return DofLayout(mesh.nx, split.iota, mesh.nz + 1)
    if sub == 2:
        return DofLayout(mesh.nx, 0, split.iota)
    raise ValueError(f"sub must be one of {_SUBS}")


def _zcells(mesh: TensorMesh, split: SubdomainSplit | None, sub) -> np.ndarray:
    if sub == "full":
        return np.arange(mesh.nz + 1)
    if split is None:
        raise ValueError("sub-domain forms require a SubdomainSplit")
    if sub == 1:
        return np.arange(split.iota, mesh.nz + 1)
    if sub == 2:
        return np.arange(split.iota)
    raise ValueError(f"sub must be one of {_SUBS}")


@dataclass(frozen=True)
class _Side:
    """One argument slot of a bilinear form.

    ``space`` is "fluct" (Q1 tensor basis) or "xline" (P1 hat in x, constant
    in z: mean, multiplier, or the interface trace).  ``trace_layout``/
    ``trace_k`` route an xline side into the fluctuation columns at z-node
    ``trace_k`` (the expanded trace matrices).
    """

    space: str
    deriv: str
    layout: DofLayout | None = None
    trace_k: int | None = None

    def size(self, nx: int) -> int:
        if self.space == "fluct" or self.trace_k is not None:
            return self.layout.n_fluct
        return nx


def _shape_tables(rule, dx: float, dz: float):
    t = rule.points
    v = np.vstack([(1.0 - t) / 2.0, (1.0 + t) / 2.0])
    dvx = np.vstack([np.full_like(t, -1.0 / dx), np.full_like(t, 1.0 / dx)])
    dvz = np.vstack([np.full_like(t, -1.0 / dz), np.full_like(t, 1.0 / dz)])
    return v, dvx, dvz


def _side_factors(side: _Side, v, dvx, dvz, n: int):
    fx = dvx if side.deriv == "dx" else v
    if side.space == "fluct":
        fz = dvz if side.deriv == "dz" else v
    else:
        if side.deriv == "dz":
            raise ValueError("xline functions are constant in z")
        fz = np.ones((1, n))
    return fx, fz


def _global6(side: _Side, nx, ii, kk, mz, x_axis, z_axis, full_shape):
    """Global dof indices and validity mask, broadcast to the local 6D shape.

    ``x_axis``/``z_axis`` locate the side's local-node axes (2, 3 for trial,
    4, 5 for test) in the einsum output ``(xcell, zcell, p, q, r, s)``.
    """
    sh_x = [1] * 6
    sh_x[0] = ii.shape[0]
    sh_x[x_axis] = 2
    I = ii.reshape(sh_x)
    valid = np.broadcast_to((I >= 1) & (I <= nx), full_shape)
    if side.space == "fluct":
        sh_z = [1] * 6
        sh_z[1] = kk.shape[0]
        sh_z[z_axis] = mz
        G = side.layout.fluct_flat(I, kk.reshape(sh_z))
    elif side.trace_k is not None:
        G = side.layout.fluct_flat(I, side.trace_k)
    else:
        G = I - 1
    return np.broadcast_to(G, full_shape), valid


def _assemble_matrix(mesh: TensorMesh, zcells: np.ndarray, coef,
                     trial: _Side, test: _Side, n: int) -> sp.csr_matrix:
    rule = gauss_rule(n)
    t, w = rule.points, rule.weights
    nx = mesh.nx
    nxc = nx + 1
    nzc = len(zcells)
    shape = (test.size(nx), trial.size(nx))
    if nzc == 0:
        return sp.csr_matrix(shape)

    xq = mesh.x_nodes[:-1, None] + (t[None, :] + 1.0) * (mesh.dx / 2.0)
    zq = mesh.z_nodes[zcells][:, None] + (t[None, :] + 1.0) * (mesh.dz / 2.0)
    v, dvx, dvz = _shape_tables(rule, mesh.dx, mesh.dz)
    w2 = np.outer(w, w) * (mesh.dx / 2.0) * (mesh.dz / 2.0)

    C = np.asarray(coef(xq[:, :, None, None], zq[None, None, :, :]), dtype=float)
    C = np.broadcast_to(C, (nxc, n, nzc, n))

    fx_t, fz_t = _side_factors(trial, v, dvx, dvz, n)
    fx_s, fz_s = _side_factors(test, v, dvx, dvz, n)
    local = np.einsum("iakb,ab,pa,qb,ra,sb->ikpqrs",
                      C, w2, fx_t, fz_t, fx_s, fz_s, optimize=True)

    ii = np.arange(nxc)[:, None] + np.arange(2)[None, :]          # (nxc, 2)
    kk = zcells[:, None] + np.arange(2)[None, :]                   # (nzc, 2)

    full_shape = local.shape
    cols, valid_t = _global6(trial, nx, ii, kk, fz_t.shape[0], 2, 3, full_shape)
    rows, valid_s = _global6(test, nx, ii, kk, fz_s.shape[0], 4, 5, full_shape)
    valid = valid_t & valid_s

    mat = sp.coo_matrix(
        (local[valid], (rows[valid], cols[valid])), shape=shape
    ).tocsr()
    mat.sum_duplicates()
    return mat


def zline_average(fn, mesh: TensorMesh, n: int = 3):
    """Callable evaluating ``(1/L_z) * integral of fn(x, .) over Omega_z``.

    Uses the same per-cell Gauss rule as the assembly, so the discrete mean
    coefficient is consistent between forms.
    """
    rule = gauss_rule(n)
    t, w = rule.points, rule.weights
    zq = (mesh.z_nodes[:-1, None] + (t[None, :] + 1.0) * (mesh.dz / 2.0)).ravel()
    wz = np.tile(w * (mesh.dz / 2.0), mesh.nz + 1) / mesh.domain.lz

    def average(x):
        x = np.asarray(x, dtype=float)
        vals = fn(x[..., None], zq.reshape((1,) * x.ndim + (-1,)))
        vals = np.broadcast_to(np.asarray(vals, float), x.shape + (zq.size,))
        return vals @ wz

    return average


def _form_spec(name, mesh, setup, split, sub, n):
    """Coefficient and side descriptors for a catalogued form."""
    lz = mesh.domain.lz
    layout = None
    if name in ("a_z", "a_xf", "b_l", "b_c", "c_f", "c_a"):
        layout = fluct_layout(mesh, split, sub)

    if name == "a_z":
        coef = lambda X, Z: setup.coeffs.a_z(X, Z) / setup.eps(Z)
        return coef, _Side("fluct", "dz", layout), _Side("fluct", "dz", layout)
    if name == "a_xf":
        return setup.coeffs.a_x, _Side("fluct", "dx", layout), _Side("fluct", "dx", layout)
    if name == "a_xa":
        coef = lambda X, Z: setup.coeffs.a_x(X, Z) / lz
        return coef, _Side("xline", "dx"), _Side("xline", "dx")
    if name == "b_l":
        coef = lambda X, Z: np.broadcast_to(1.0 / setup.eps(Z),
                                            np.broadcast(X, Z).shape)
        return coef, _Side("xline", "val"), _Side("fluct", "val", layout)
    if name == "b_c":
        coef = lambda X, Z: np.full(np.broadcast(X, Z).shape, 1.0 / lz)
        return coef, _Side("fluct", "val", layout), _Side("xline", "val")
    if name == "c_f":
        return setup.coeffs.a_x, _Side("xline", "dx"), _Side("fluct", "dx", layout)
    if name == "c_a":
        abar = zline_average(setup.coeffs.a_x, mesh, n)
        coef = lambda X, Z: setup.coeffs.a_x(X, Z) - abar(X)
        return coef, _Side("fluct", "dx", layout), _Side("xline", "dx")
    raise ValueError(f"unknown form {name!r}")


def assemble_form(name: str, mesh: TensorMesh, setup: ManufacturedProblem,
                  split: SubdomainSplit | None = None, sub="full",
                  n: int = 3) -> sp.csr_matrix:
    """Assemble one catalogued bilinear form into a CSR matrix.

    Rows index the test space, columns the trial space.  ``sub`` selects the
    z-integration range: "full", 1 (above the interface) or 2 (below).
    """
    if name == "d_iota":
        raise ValueError("d_iota is catalogued but never assembled")
    if name not in FORM_IDS:
        raise ValueError(f"unknown form {name!r}; choose from {FORM_IDS}")
    if name == "a_xa" and sub != "full":
        raise ValueError("a_xa always integrates the full z-average")
    coef, trial, test = _form_spec(name, mesh, setup, split, sub, n)
    zc = _zcells(mesh, split, "full" if name == "a_xa" else sub)
    return _assemble_matrix(mesh, zc, coef, trial, test, n)


def assemble_expanded_trace(name: str, mesh: TensorMesh, split: SubdomainSplit,
                            setup: ManufacturedProblem, n: int = 3) -> sp.csr_matrix:
    """Assemble ``c_a2`` or ``b_c2`` applied to the interface trace.

    The trial function is the trace ``u'_1(., z_iota)``, constant in z over
    the lower sub-domain; its columns are expanded into the upper-subdomain
    fluctuation layout at ``k = iota`` so the matrix conforms with the
    corresponding sub-domain-1 block.
    """
    if name not in ("c_a", "b_c"):
        raise ValueError("expanded trace matrices exist only for c_a and b_c")
    layout1 = fluct_layout(mesh, split, 1)
    zc = _zcells(mesh, split, 2)
    if name == "c_a":
        abar = zline_average(setup.coeffs.a_x, mesh, n)
        coef = lambda X, Z: setup.coeffs.a_x(X, Z) - abar(X)
        trial = _Side("xline", "dx", layout1, trace_k=split.iota)
        test = _Side("xline", "dx")
    else:
        lz = mesh.domain.lz
        coef = lambda X, Z: np.full(np.broadcast(X, Z).shape, 1.0 / lz)
        trial = _Side("xline", "val", layout1, trace_k=split.iota)
        test = _Side("xline", "val")
    return _assemble_matrix(mesh, zc, coef, trial, test, n)


def _assemble_rhs_2d(mesh, zcells, coef, test: _Side, n: int) -> np.ndarray:
    rule = gauss_rule(n)
    t, w = rule.points, rule.weights
    nx = mesh.nx
    nxc = nx + 1
    nzc = len(zcells)
    out = np.zeros(test.size(nx))
    if nzc == 0:
        return out
    xq = mesh.x_nodes[:-1, None] + (t[None, :] + 1.0) * (mesh.dx / 2.0)
    zq = mesh.z_nodes[zcells][:, None] + (t[None, :] + 1.0) * (mesh.dz / 2.0)
    v, dvx, dvz = _shape_tables(rule, mesh.dx, mesh.dz)
    w2 = np.outer(w, w) * (mesh.dx / 2.0) * (mesh.dz / 2.0)
    C = np.broadcast_to(
        np.asarray(coef(xq[:, :, None, None], zq[None, None, :, :]), float),
        (nxc, n, nzc, n))
    fx, fz = _side_factors(test, v, dvx, dvz, n)
    local = np.einsum("iakb,ab,ra,sb->ikrs", C, w2, fx, fz, optimize=True)

    ii = np.arange(nxc)[:, None] + np.arange(2)[None, :]
    kk = zcells[:, None] + np.arange(2)[None, :]
    mz = fz.shape[0]
    I = np.broadcast_to(ii[:, None, :, None], (nxc, nzc, 2, mz))
    valid = (I >= 1) & (I <= nx)
    if test.space == "fluct":
        K = np.broadcast_to(kk[None, :, None, :], (nxc, nzc, 2, mz))
        idx = test.layout.fluct_flat(I, K)
    else:
        idx = I - 1
        idx = np.broadcast_to(idx, (nxc, nzc, 2, mz))
    np.add.at(out, idx[valid], local[valid])
    return out


def _x_boundary_term(mesh, g, n: int) -> np.ndarray:
    """Vector of ``integral g(x) chi_i dx`` over the interior hats."""
    rule = gauss_rule(n)
    t, w = rule.points, rule.weights
    nx = mesh.nx
    xq = mesh.x_nodes[:-1, None] + (t[None, :] + 1.0) * (mesh.dx / 2.0)
    v = np.vstack([(1.0 - t) / 2.0, (1.0 + t) / 2.0])
    gq = np.broadcast_to(np.asarray(g(xq), float), xq.shape)
    local = np.einsum("ia,a,ra->ir", gq, w * (mesh.dx / 2.0), v)
    out = np.zeros(nx)
    I = np.arange(nx + 1)[:, None] + np.arange(2)[None, :]
    valid = (I >= 1) & (I <= nx)
    np.add.at(out, I[valid] - 1, local[valid])
    return out


def assemble_rhs_mean(mesh: TensorMesh, setup: ManufacturedProblem,
                      n: int = 3) -> np.ndarray:
    """Mean-equation load: z-averaged source plus boundary flux average."""
    coef = lambda X, Z: setup.f(X, Z) / mesh.domain.lz
    vec = _assemble_rhs_2d(mesh, np.arange(mesh.nz + 1), coef,
                           _Side("xline", "val"), n)
    g = lambda x: (setup.g_plus(x) - setup.g_minus(x)) / mesh.domain.lz
    return vec + _x_boundary_term(mesh, g, n)


def assemble_rhs_fluct(mesh: TensorMesh, setup: ManufacturedProblem,
                       which: str, split: SubdomainSplit | None = None,
                       n: int = 3) -> np.ndarray:
    """Fluctuation-equation load for the P, AP or APL model.

    P and AP integrate the source over the whole domain and carry both
    Neumann terms; APL integrates over the upper sub-domain and carries the
    top flux only.
    """
    if which in ("P", "AP"):
        layout = fluct_layout(mesh, None, "full")
        vec = _assemble_rhs_2d(mesh, np.arange(mesh.nz + 1), setup.f,
                               _Side("fluct", "val", layout), n)
        gp = _x_boundary_term(mesh, setup.g_plus, n)
        gm = _x_boundary_term(mesh, setup.g_minus, n)
        top = layout.fluct_flat(np.arange(1, mesh.nx + 1), mesh.nz + 1)
        bot = layout.fluct_flat(np.arange(1, mesh.nx + 1), 0)
        vec[top] += gp
        vec[bot] -= gm
        return vec
    if which == "APL":
        if split is None:
            raise ValueError("the APL right-hand side requires a SubdomainSplit")
        layout = fluct_layout(mesh, split, 1)
        vec = _assemble_rhs_2d(mesh, _zcells(mesh, split, 1), setup.f,
                               _Side("fluct", "val", layout), n)
        gp = _x_boundary_term(mesh, setup.g_plus, n)
        top = layout.fluct_flat(np.arange(1, mesh.nx + 1), mesh.nz + 1)
        vec[top] += gp
        return vec
    raise ValueError(f"unknown model {which!r}; choose P, AP or APL")
