"""Reference Q1/P1 shape functions and Gauss-Legendre quadrature rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadratureRule1D", "gauss_rule", "q1_eval", "p1_eval"]

_SUPPORTED_ORDERS = (1, 2, 3, 4, 5)

#: Reference-square corner coordinates, counterclockwise from (-1, -1).
Q1_CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


@dataclass(frozen=True)
class QuadratureRule1D:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def gauss_rule(n: int) -> QuadratureRule1D:
    """Gauss-Legendre rule with ``n`` points, exact for degree ``2n - 1``."""
    if n not in _SUPPORTED_ORDERS:
        raise ValueError(f"unsupported quadrature order {n}; use one of {_SUPPORTED_ORDERS}")
    points, weights = np.polynomial.legendre.leggauss(n)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule1D(points=points, weights=weights)


def p1_eval(xi):
    """P1 hat values and reference gradients at ``xi`` in [-1, 1].

    Returns ``(values, gradients)`` with leading axis of size 2 (left node,
    right node); trailing axes follow the shape of ``xi``.
    """
    xi = np.asarray(xi, dtype=float)
    values = np.stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0])
    gradients = np.broadcast_to(
        np.array([-0.5, 0.5]).reshape((2,) + (1,) * xi.ndim), values.shape
    ).copy()
    return values, gradients


def q1_eval(ref_xy):
    """Q1 corner-shape values and reference gradients at a point of [-1, 1]^2.

    Returns ``(values, gradients)`` of shapes (4,) and (4, 2), corner order
    counterclockwise from (-1, -1).
    """
    xi, eta = float(ref_xy[0]), float(ref_xy[1])
    sx = np.array([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0])
    sz = np.array([(1.0 - eta) / 2.0, (1.0 + eta) / 2.0])
    dsx = np.array([-0.5, 0.5])
    dsz = np.array([-0.5, 0.5])
    # corner -> (x-node, z-node) indices
    ix = np.array([0, 1, 1, 0])
    iz = np.array([0, 0, 1, 1])
    values = sx[ix] * sz[iz]
    gradients = np.column_stack([dsx[ix] * sz[iz], sx[ix] * dsz[iz]])
    return values, gradients
