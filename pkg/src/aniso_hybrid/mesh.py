"""Tensor-product rectangular grids and their decomposition at an interface node.

The grid covers a rectangle ``(x_minus, x_plus) x (z_minus, z_plus)`` with
uniformly spaced nodes ``x_i = x_minus + i*dx`` for ``i = 0..nx+1`` (and
likewise in z).  ``nx`` and ``nz`` count *interior* nodes, so a mesh labelled
"64x64 cells" corresponds to ``nx = nz = 63``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Domain",
    "TensorMesh",
    "SubdomainSplit",
    "DOMAIN_A",
    "DOMAIN_B",
    "build_mesh",
    "split_at_interface",
    "find_interface_for_eps",
]


@dataclass(frozen=True)
class Domain:
    """Rectangle (x_minus, x_plus) x (z_minus, z_plus)."""

    x_minus: float
    x_plus: float
    z_minus: float
    z_plus: float

    def __post_init__(self):
        if not self.x_minus < self.x_plus:
            raise ValueError("domain requires x_minus < x_plus")
        if not self.z_minus < self.z_plus:
            raise ValueError("domain requires z_minus < z_plus")

    @property
    def lx(self) -> float:
        return self.x_plus - self.x_minus

    @property
    def lz(self) -> float:
        return self.z_plus - self.z_minus


#: Preset used with homogeneous anisotropy ratios.
DOMAIN_A = Domain(0.0, 1.0, -1.0, 1.0)
#: Preset used with the tanh anisotropy profile.
DOMAIN_B = Domain(0.0, 1.0, -1.5, 0.5)


@dataclass(frozen=True)
class TensorMesh:
    """Uniform tensor grid with ``nx`` (resp. ``nz``) interior nodes."""

    domain: Domain
    nx: int
    nz: int
    x_nodes: np.ndarray
    z_nodes: np.ndarray
    dx: float
    dz: float

    @property
    def h(self) -> float:
        """Representative mesh size ``sqrt(dx*dz)``."""
        return float(np.sqrt(self.dx * self.dz))


@dataclass(frozen=True)
class SubdomainSplit:
    """Interface node index and derived bookkeeping.

    ``omega1`` holds the z-cells ``[z_k, z_{k+1}]`` for ``k = iota..nz`` and
    ``omega2`` the cells below the interface.  ``mz`` counts the z-nodes
    carried by the fluctuation unknown on ``omega1`` (``k = iota..nz+1``).
    """

    mesh: TensorMesh
    iota: int
    z_iota: float
    mz: int
    len_omega2: float


def _uniform_nodes(lo: float, hi: float, n_interior: int) -> tuple[np.ndarray, float]:
    step = (hi - lo) / (n_interior + 1)
    nodes = lo + step * np.arange(n_interior + 2)
    nodes[-1] = hi  # reproduce the endpoint bit-exactly
    nodes.setflags(write=False)
    return nodes, step


def build_mesh(domain: Domain, nx: int, nz: int) -> TensorMesh:
    """Build the uniform tensor grid with the given interior node counts."""
    if nx < 1 or nz < 1:
        raise ValueError("build_mesh requires nx >= 1 and nz >= 1")
    x_nodes, dx = _uniform_nodes(domain.x_minus, domain.x_plus, nx)
    z_nodes, dz = _uniform_nodes(domain.z_minus, domain.z_plus, nz)
    return TensorMesh(domain=domain, nx=nx, nz=nz,
                      x_nodes=x_nodes, z_nodes=z_nodes, dx=dx, dz=dz)


def split_at_interface(mesh: TensorMesh, iota: int) -> SubdomainSplit:
    """Split the z-direction at node ``iota`` (must be an interior node)."""
    if not 1 <= iota <= mesh.nz:
        raise ValueError(f"interface index {iota} outside [1, {mesh.nz}]")
    z_iota = float(mesh.z_nodes[iota])
    return SubdomainSplit(
        mesh=mesh,
        iota=iota,
        z_iota=z_iota,
        mz=mesh.nz + 2 - iota,
        len_omega2=z_iota - mesh.domain.z_minus,
    )


def find_interface_for_eps(mesh: TensorMesh, eps_profile, eps_target: float) -> int:
    """Largest interior node index with ``eps(z_iota) <= eps_target``.

    ``eps_profile`` is any callable evaluating the (strictly increasing)
    anisotropy ratio.  The result is clamped to ``[1, nz]``.
    """
    eps_vals = np.asarray(eps_profile(mesh.z_nodes[1:mesh.nz + 1]), dtype=float)
    below = np.nonzero(eps_vals <= eps_target)[0]
    if below.size == 0:
        return 1
    return int(below[-1]) + 1
