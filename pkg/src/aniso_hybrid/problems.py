"""Anisotropy profiles, diffusion coefficients and manufactured test problems.

Each setup fixes an exact solution ``u_e`` and derives the volumetric source
``f`` and the scaled Neumann data ``g_pm`` analytically, so that discretization
errors can be measured exactly.  The sources are coded from hand-derived
partials of ``u_e`` (numerical differentiation of ``f`` is far too noisy once
``1/eps`` reaches 1e25); a finite-difference cross-check lives in the test
suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .mesh import Domain

__all__ = [
    "EpsProfile",
    "Coefficients",
    "ManufacturedProblem",
    "eps_tanh",
    "setup_a",
    "setup_b",
    "setup_zero_fluctuation",
    "make_setup",
]


def _sech2(y):
    """Numerically stable sech(y)**2."""
    a = np.abs(np.asarray(y, dtype=float))
    e = np.exp(-a)
    return (2.0 * e / (1.0 + e * e)) ** 2


@dataclass(frozen=True)
class EpsProfile:
    """Anisotropy ratio eps(z), either constant or a tanh ramp.

    The tanh ramp is ``(eps_max*(1 + tanh(r z)) + eps_min*(1 - tanh(r z)))/2``,
    strictly increasing whenever ``eps_min < eps_max`` and ``r > 0``.
    """

    kind: str
    eps_min: float
    eps_max: float
    r: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.eps_min <= self.eps_max <= 1.0):
            raise ValueError("profile bounds must satisfy 0 < eps_min <= eps_max <= 1")
        if self.kind not in ("constant", "tanh"):
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> "EpsProfile":
        return cls(kind="constant", eps_min=value, eps_max=value)

    @classmethod
    def tanh_profile(cls, eps_min: float, eps_max: float, r: float = 30.0) -> "EpsProfile":
        return cls(kind="tanh", eps_min=eps_min, eps_max=eps_max, r=r)

    def __call__(self, z):
        if self.kind == "constant":
            return np.full_like(np.asarray(z, dtype=float), self.eps_min)
        # (1 +- tanh(y))/2 = expit(+-2y); this form never cancels, so the
        # profile stays positive even when eps_min is below eps_max * 2**-53
        y = 2.0 * self.r * np.asarray(z, dtype=float)
        return self.eps_max * expit(y) + self.eps_min * expit(-y)

    def dz(self, z):
        if self.kind == "constant":
            return np.zeros_like(np.asarray(z, dtype=float))
        d = 0.5 * (self.eps_max - self.eps_min)
        return d * self.r * _sech2(self.r * np.asarray(z, dtype=float))

    def dzz(self, z):
        if self.kind == "constant":
            return np.zeros_like(np.asarray(z, dtype=float))
        z = np.asarray(z, dtype=float)
        return -2.0 * self.r * np.tanh(self.r * z) * self.dz(z)


def eps_tanh(z, eps_min: float, eps_max: float, r: float):
    """Evaluate the tanh anisotropy ramp at ``z``."""
    return EpsProfile.tanh_profile(eps_min, eps_max, r)(z)


@dataclass(frozen=True)
class Coefficients:
    """Diffusion coefficients and their analytic partial derivatives."""

    a_x: Callable
    a_z: Callable
    dx_a_x: Callable
    dz_a_x: Callable
    dx_a_z: Callable
    dz_a_z: Callable
    c1: float = 0.0
    c2: float = 0.0


@dataclass(frozen=True)
class ManufacturedProblem:
    """A test problem with known exact solution and matching data."""

    name: str
    domain: Domain
    eps: EpsProfile
    coeffs: Coefficients
    u_exact: Callable
    du_dx: Callable
    du_dz: Callable
    f: Callable
    g_plus: Callable
    g_minus: Callable


def _check_positivity(domain: Domain, coeffs: Coefficients, n: int = 101) -> None:
    x = np.linspace(domain.x_minus, domain.x_plus, n)
    z = np.linspace(domain.z_minus, domain.z_plus, n)
    X, Z = np.meshgrid(x, z, indexing="ij")
    if np.min(coeffs.a_x(X, Z)) <= 0.0:
        raise ValueError("A_x is not positive on the domain")
    if np.min(coeffs.a_z(X, Z)) <= 0.0:
        raise ValueError("A_z is not positive on the domain")


def _source_from_parts(coeffs: Coefficients, eps: EpsProfile,
                       ux, uxx, uz, uzz):
    """Assemble f = -div(A grad u) from the partials of u.

    The z-flux divergence expands to
    ``(dzA_z/eps - A_z eps'/eps^2) uz + (A_z/eps) uzz``.
    """

    def f(x, z):
        e = eps(z)
        e1 = eps.dz(z)
        fx = coeffs.dx_a_x(x, z) * ux(x, z) + coeffs.a_x(x, z) * uxx(x, z)
        fz = (coeffs.dz_a_z(x, z) / e - coeffs.a_z(x, z) * e1 / e ** 2) * uz(x, z) \
            + (coeffs.a_z(x, z) / e) * uzz(x, z)
        return -(fx + fz)

    return f


def _neumann_data(domain: Domain, coeffs: Coefficients, eps: EpsProfile, uz):
    def g_plus(x):
        zp = domain.z_plus
        return coeffs.a_z(x, np.full_like(np.asarray(x, float), zp)) / eps(zp) \
            * uz(x, np.full_like(np.asarray(x, float), zp))

    def g_minus(x):
        zm = domain.z_minus
        return coeffs.a_z(x, np.full_like(np.asarray(x, float), zm)) / eps(zm) \
            * uz(x, np.full_like(np.asarray(x, float), zm))

    return g_plus, g_minus


def setup_a(domain: Domain, eps: EpsProfile) -> ManufacturedProblem:
    """Polynomial coefficients ``A_x = c1 + x z^2``, ``A_z = c2 + x z``.

    Exact solution ``sin(2 pi x / L_x) * (1 + eps(z) sin(2 pi z / L_z))``,
    with ``c1 = c2 = L_z``.
    """
    c1 = c2 = domain.lz
    coeffs = Coefficients(
        a_x=lambda x, z: c1 + x * z ** 2,
        a_z=lambda x, z: c2 + x * z,
        dx_a_x=lambda x, z: z ** 2,
        dz_a_x=lambda x, z: 2.0 * x * z,
        dx_a_z=lambda x, z: z * np.ones_like(np.asarray(x, float)),
        dz_a_z=lambda x, z: x * np.ones_like(np.asarray(z, float)),
        c1=c1, c2=c2,
    )
    kx = 2.0 * np.pi / domain.lx
    kz = 2.0 * np.pi / domain.lz
    x0 = domain.x_minus

    def u(x, z):
        return np.sin(kx * (x - x0)) * (1.0 + eps(z) * np.sin(kz * z))

    def ux(x, z):
        return kx * np.cos(kx * (x - x0)) * (1.0 + eps(z) * np.sin(kz * z))

    def uxx(x, z):
        return -kx ** 2 * np.sin(kx * (x - x0)) * (1.0 + eps(z) * np.sin(kz * z))

    def uz(x, z):
        return np.sin(kx * (x - x0)) * (eps.dz(z) * np.sin(kz * z)
                                        + eps(z) * kz * np.cos(kz * z))

    def uzz(x, z):
        return np.sin(kx * (x - x0)) * (eps.dzz(z) * np.sin(kz * z)
                                        + 2.0 * eps.dz(z) * kz * np.cos(kz * z)
                                        - eps(z) * kz ** 2 * np.sin(kz * z))

    _check_positivity(domain, coeffs)
    g_plus, g_minus = _neumann_data(domain, coeffs, eps, uz)
    return ManufacturedProblem(
        name="a", domain=domain, eps=eps, coeffs=coeffs,
        u_exact=u, du_dx=ux, du_dz=uz,
        f=_source_from_parts(coeffs, eps, ux, uxx, uz, uzz),
        g_plus=g_plus, g_minus=g_minus,
    )


def setup_b(domain: Domain, eps: EpsProfile) -> ManufacturedProblem:
    """Trigonometric coefficients ``A_x = 1 + cos(c1 + x z)``,
    ``A_z = 1 + sin^2(c2 + x z)`` with exact solution
    ``sin(2 pi x / L_x) * (1 + sin(2 pi eps(z) z / L_z))``.
    """
    c1 = c2 = domain.lz
    coeffs = Coefficients(
        a_x=lambda x, z: 1.0 + np.cos(c1 + x * z),
        a_z=lambda x, z: 1.0 + np.sin(c2 + x * z) ** 2,
        dx_a_x=lambda x, z: -z * np.sin(c1 + x * z),
        dz_a_x=lambda x, z: -x * np.sin(c1 + x * z),
        dx_a_z=lambda x, z: z * np.sin(2.0 * (c2 + x * z)),
        dz_a_z=lambda x, z: x * np.sin(2.0 * (c2 + x * z)),
        c1=c1, c2=c2,
    )
    kx = 2.0 * np.pi / domain.lx
    kz = 2.0 * np.pi / domain.lz
    x0 = domain.x_minus

    def phase(z):
        return kz * eps(z) * np.asarray(z, dtype=float)

    def phase_dz(z):
        return kz * (eps.dz(z) * np.asarray(z, dtype=float) + eps(z))

    def phase_dzz(z):
        return kz * (eps.dzz(z) * np.asarray(z, dtype=float) + 2.0 * eps.dz(z))

    def u(x, z):
        return np.sin(kx * (x - x0)) * (1.0 + np.sin(phase(z)))

    def ux(x, z):
        return kx * np.cos(kx * (x - x0)) * (1.0 + np.sin(phase(z)))

    def uxx(x, z):
        return -kx ** 2 * np.sin(kx * (x - x0)) * (1.0 + np.sin(phase(z)))

    def uz(x, z):
        return np.sin(kx * (x - x0)) * np.cos(phase(z)) * phase_dz(z)

    def uzz(x, z):
        return np.sin(kx * (x - x0)) * (np.cos(phase(z)) * phase_dzz(z)
                                        - np.sin(phase(z)) * phase_dz(z) ** 2)

    _check_positivity(domain, coeffs)
    g_plus, g_minus = _neumann_data(domain, coeffs, eps, uz)
    return ManufacturedProblem(
        name="b", domain=domain, eps=eps, coeffs=coeffs,
        u_exact=u, du_dx=ux, du_dz=uz,
        f=_source_from_parts(coeffs, eps, ux, uxx, uz, uzz),
        g_plus=g_plus, g_minus=g_minus,
    )


def setup_zero_fluctuation(domain: Domain,
                           eps: EpsProfile | None = None) -> ManufacturedProblem:
    """Validation case with a z-independent exact solution.

    ``A_x = A_z = 1``, ``u_e = sin(2 pi (x - x_minus) / L_x)`` and ``g_pm = 0``;
    the fluctuation of the exact solution vanishes identically, so the mean
    part alone solves the 1D limit problem.
    """
    if eps is None:
        eps = EpsProfile.constant(1.0)
    ones = lambda x, z: np.ones(np.broadcast(np.asarray(x), np.asarray(z)).shape)
    zeros = lambda x, z: np.zeros(np.broadcast(np.asarray(x), np.asarray(z)).shape)
    coeffs = Coefficients(a_x=ones, a_z=ones, dx_a_x=zeros, dz_a_x=zeros,
                          dx_a_z=zeros, dz_a_z=zeros)
    kx = 2.0 * np.pi / domain.lx
    x0 = domain.x_minus

    def u(x, z):
        return np.sin(kx * (np.asarray(x, float) - x0)) \
            * np.ones_like(np.asarray(z, float))

    return ManufacturedProblem(
        name="zero-fluct", domain=domain, eps=eps, coeffs=coeffs,
        u_exact=u,
        du_dx=lambda x, z: kx * np.cos(kx * (np.asarray(x, float) - x0))
            * np.ones_like(np.asarray(z, float)),
        du_dz=zeros,
        f=lambda x, z: kx ** 2 * np.sin(kx * (np.asarray(x, float) - x0))
            * np.ones_like(np.asarray(z, float)),
        g_plus=lambda x: np.zeros_like(np.asarray(x, float)),
        g_minus=lambda x: np.zeros_like(np.asarray(x, float)),
    )


_SETUPS = {"a": setup_a, "b": setup_b, "zero-fluct": setup_zero_fluctuation}


def make_setup(name: str, domain: Domain, eps: EpsProfile) -> ManufacturedProblem:
    """Look up a setup by name ("a", "b" or "zero-fluct")."""
    if name not in _SETUPS:
        raise ValueError(f"unknown setup {name!r}; choose from {sorted(_SETUPS)}")
    if name == "zero-fluct":
        return setup_zero_fluctuation(domain, eps)
    return _SETUPS[name](domain, eps)
