"""Assembly tests against a slow, loop-based dense oracle.

The oracle evaluates every bilinear form with explicit Python loops over
cells, local nodes and quadrature points, sharing nothing with the vectorized
production kernel except the quadrature rule definition.
"""

import numpy as np
import pytest

from aniso_hybrid import assembly as asm
from aniso_hybrid.basis import gauss_rule
from aniso_hybrid.mesh import DOMAIN_A, DOMAIN_B, build_mesh, split_at_interface
from aniso_hybrid.problems import EpsProfile, make_setup


def hat(j, x, nodes):
    """P1 tent function centered at node j, evaluated pointwise."""
    dx = nodes[1] - nodes[0]
    return max(0.0, 1.0 - abs(x - nodes[j]) / dx)


def dhat(j, x, nodes):
    dx = nodes[1] - nodes[0]
    if nodes[j] - dx < x < nodes[j]:
        return 1.0 / dx
    if nodes[j] < x < nodes[j] + dx:
        return -1.0 / dx
    return 0.0


def zbar(fn, x, mesh, n=3):
    """z-average of fn(x, .) with the assembly quadrature."""
    rule = gauss_rule(n)
    total = 0.0
    for k in range(mesh.nz + 1):
        for t, w in zip(rule.points, rule.weights):
            z = mesh.z_nodes[k] + (t + 1.0) * mesh.dz / 2.0
            total += w * (mesh.dz / 2.0) * fn(x, z)
    return total / mesh.domain.lz


def dense_form(name, mesh, setup, split=None, sub="full", n=3):
    """Loop-based dense assembly of one form (rows = test, cols = trial)."""
    nx, nz = mesh.nx, mesh.nz
    rule = gauss_rule(n)
    layout = asm.fluct_layout(mesh, split, sub) if name != "a_xa" else None
    if sub == "full":
        kcells = range(nz + 1)
    elif sub == 1:
        kcells = range(split.iota, nz + 1)
    else:
        kcells = range(split.iota)

    co = setup.coeffs
    eps = setup.eps
    lz = mesh.domain.lz
    if name == "a_z":
        shape = (layout.n_fluct, layout.n_fluct)
    elif name == "a_xf":
        shape = (layout.n_fluct, layout.n_fluct)
    elif name == "a_xa":
        shape = (nx, nx)
        kcells = range(nz + 1)
    elif name == "b_l":
        shape = (layout.n_fluct, nx)
    elif name == "b_c":
        shape = (nx, layout.n_fluct)
    elif name == "c_f":
        shape = (layout.n_fluct, nx)
    elif name == "c_a":
        shape = (nx, layout.n_fluct)
    mat = np.zeros(shape)

    for ic in range(nx + 1):
        for k in kcells:
            for ta, wa in zip(rule.points, rule.weights):
                for tb, wb in zip(rule.points, rule.weights):
                    x = mesh.x_nodes[ic] + (ta + 1.0) * mesh.dx / 2.0
                    z = mesh.z_nodes[k] + (tb + 1.0) * mesh.dz / 2.0
                    w = wa * wb * mesh.dx * mesh.dz / 4.0
                    # local fluct nodes: (x-node ic+p, z-node k+q); local
                    # hats: x-nodes ic and ic+1
                    for p in range(2):
                        i_a = ic + p
                        if not 1 <= i_a <= nx:
                            continue
                        hx = hat(i_a, x, mesh.x_nodes)
                        dhx = dhat(i_a, x, mesh.x_nodes)
                        for pp in range(2):
                            i_b = ic + pp
                            if not 1 <= i_b <= nx:
                                continue
                            gx = hat(i_b, x, mesh.x_nodes)
                            dgx = dhat(i_b, x, mesh.x_nodes)
                            if name == "a_xa":
                                mat[i_a - 1, i_b - 1] += \
                                    w * co.a_x(x, z) / lz * dhx * dgx
                                continue
                            for q in range(2):
                                k_a = k + q
                                hz = hat(k_a, z, mesh.z_nodes)
                                dhz = dhat(k_a, z, mesh.z_nodes)
                                fl_a = layout.fluct_flat(i_a, k_a)
                                if name in ("a_z", "a_xf"):
                                    for qq in range(2):
                                        k_b = k + qq
                                        gz = hat(k_b, z, mesh.z_nodes)
                                        dgz = dhat(k_b, z, mesh.z_nodes)
                                        fl_b = layout.fluct_flat(i_b, k_b)
                                        if name == "a_z":
                                            val = co.a_z(x, z) / eps(z) \
                                                * hx * dhz * gx * dgz
                                        else:
                                            val = co.a_x(x, z) * dhx * hz * dgx * gz
                                        mat[fl_a, fl_b] += w * val
                                elif name == "b_l":
                                    # test fluct (i_a, k_a), trial hat i_b
                                    mat[fl_a, i_b - 1] += \
                                        w * (1.0 / eps(z)) * hx * hz * gx
                                elif name == "c_f":
                                    mat[fl_a, i_b - 1] += \
                                        w * co.a_x(x, z) * dhx * hz * dgx
                                elif name == "b_c":
                                    # test hat i_b, trial fluct (i_a, k_a)
                                    mat[i_b - 1, fl_a] += \
                                        w * (1.0 / lz) * hx * hz * gx
                                elif name == "c_a":
                                    aprime = co.a_x(x, z) - zbar(co.a_x, x, mesh, n)
                                    mat[i_b - 1, fl_a] += \
                                        w * aprime * dhx * hz * dgx
    return mat


def dense_expanded_trace(name, mesh, split, setup, n=3):
    nx = mesh.nx
    rule = gauss_rule(n)
    layout1 = asm.fluct_layout(mesh, split, 1)
    eps = setup.eps
    co = setup.coeffs
    lz = mesh.domain.lz
    mat = np.zeros((nx, layout1.n_fluct))
    for ic in range(nx + 1):
        for k in range(split.iota):
            for ta, wa in zip(rule.points, rule.weights):
                for tb, wb in zip(rule.points, rule.weights):
                    x = mesh.x_nodes[ic] + (ta + 1.0) * mesh.dx / 2.0
                    z = mesh.z_nodes[k] + (tb + 1.0) * mesh.dz / 2.0
                    w = wa * wb * mesh.dx * mesh.dz / 4.0
                    for p in range(2):
                        i_tst = ic + p
                        if not 1 <= i_tst <= nx:
                            continue
                        for pp in range(2):
                            i_tr = ic + pp
                            if not 1 <= i_tr <= nx:
                                continue
                            col = layout1.fluct_flat(i_tr, split.iota)
                            if name == "c_a":
                                aprime = co.a_x(x, z) - zbar(co.a_x, x, mesh, n)
                                val = aprime * dhat(i_tr, x, mesh.x_nodes) \
                                    * dhat(i_tst, x, mesh.x_nodes)
                            else:
                                val = (1.0 / lz) * hat(i_tr, x, mesh.x_nodes) \
                                    * hat(i_tst, x, mesh.x_nodes)
                            mat[i_tst - 1, col] += w * val
    return mat


@pytest.fixture(scope="module")
def small_case():
    mesh = build_mesh(DOMAIN_B, 3, 4)
    setup = make_setup("a", DOMAIN_B, EpsProfile.tanh_profile(1e-2, 1.0))
    split = split_at_interface(mesh, 2)
    return mesh, setup, split


ALL_FORMS = ["a_z", "a_xf", "a_xa", "b_l", "b_c", "c_f", "c_a"]


class TestAgainstDenseOracle:
    @pytest.mark.parametrize("name", ALL_FORMS)
    def test_full_domain(self, small_case, name):
        mesh, setup, split = small_case
        got = asm.assemble_form(name, mesh, setup).toarray()
        want = dense_form(name, mesh, setup)
        scale = max(np.abs(want).max(), 1.0)
        np.testing.assert_allclose(got, want, atol=1e-12 * scale)

    @pytest.mark.parametrize("name", ["a_z", "a_xf", "b_l", "b_c", "c_f", "c_a"])
    @pytest.mark.parametrize("sub", [1, 2])
    def test_subdomains(self, small_case, name, sub):
        mesh, setup, split = small_case
        got = asm.assemble_form(name, mesh, setup, split, sub).toarray()
        want = dense_form(name, mesh, setup, split, sub)
        scale = max(np.abs(want).max(), 1.0)
        np.testing.assert_allclose(got, want, atol=1e-12 * scale)

    @pytest.mark.parametrize("name", ["c_a", "b_c"])
    def test_expanded_trace(self, small_case, name):
        mesh, setup, split = small_case
        got = asm.assemble_expanded_trace(name, mesh, split, setup).toarray()
        want = dense_expanded_trace(name, mesh, split, setup)
        scale = max(np.abs(want).max(), 1.0)
        np.testing.assert_allclose(got, want, atol=1e-12 * scale)

    def test_setup_b_coefficients_too(self):
        mesh = build_mesh(DOMAIN_B, 2, 3)
        setup = make_setup("b", DOMAIN_B, EpsProfile.tanh_profile(1e-2, 1.0))
        for name in ("a_z", "c_a"):
            got = asm.assemble_form(name, mesh, setup).toarray()
            want = dense_form(name, mesh, setup)
            scale = max(np.abs(want).max(), 1.0)
            np.testing.assert_allclose(got, want, atol=1e-12 * scale)


class TestRightHandSides:
    def test_mean_rhs_oracle(self, small_case):
        mesh, setup, split = small_case
        got = asm.assemble_rhs_mean(mesh, setup)
        rule = gauss_rule(3)
        want = np.zeros(mesh.nx)
        for ic in range(mesh.nx + 1):
            for ta, wa in zip(rule.points, rule.weights):
                x = mesh.x_nodes[ic] + (ta + 1.0) * mesh.dx / 2.0
                for j in range(1, mesh.nx + 1):
                    hx = hat(j, x, mesh.x_nodes)
                    if hx == 0.0:
                        continue
                    # z-averaged source
                    for k in range(mesh.nz + 1):
                        for tb, wb in zip(rule.points, rule.weights):
                            z = mesh.z_nodes[k] + (tb + 1.0) * mesh.dz / 2.0
                            w = wa * wb * mesh.dx * mesh.dz / 4.0
                            want[j - 1] += w * setup.f(x, z) / mesh.domain.lz * hx
                    # boundary flux average
                    want[j - 1] += wa * (mesh.dx / 2.0) * hx * (
                        setup.g_plus(x) - setup.g_minus(x)) / mesh.domain.lz
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-13)

    def test_fluct_rhs_oracle_full(self, small_case):
        mesh, setup, split = small_case
        layout = asm.fluct_layout(mesh, None, "full")
        got = asm.assemble_rhs_fluct(mesh, setup, "AP")
        rule = gauss_rule(3)
        want = np.zeros(layout.n_fluct)
        for i in range(1, mesh.nx + 1):
            for k in range(mesh.nz + 2):
                dof = layout.fluct_flat(i, k)
                for ic in range(mesh.nx + 1):
                    for kc in range(mesh.nz + 1):
                        for ta, wa in zip(rule.points, rule.weights):
                            for tb, wb in zip(rule.points, rule.weights):
                                x = mesh.x_nodes[ic] + (ta + 1.0) * mesh.dx / 2.0
                                z = mesh.z_nodes[kc] + (tb + 1.0) * mesh.dz / 2.0
                                w = wa * wb * mesh.dx * mesh.dz / 4.0
                                want[dof] += w * setup.f(x, z) \
                                    * hat(i, x, mesh.x_nodes) * hat(k, z, mesh.z_nodes)
                # Neumann terms hit the top and bottom z-rows only
                for ic in range(mesh.nx + 1):
                    for ta, wa in zip(rule.points, rule.weights):
                        x = mesh.x_nodes[ic] + (ta + 1.0) * mesh.dx / 2.0
                        hx = wa * (mesh.dx / 2.0) * hat(i, x, mesh.x_nodes)
                        if k == mesh.nz + 1:
                            want[dof] += hx * setup.g_plus(x)
                        if k == 0:
                            want[dof] -= hx * setup.g_minus(x)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-13)

    def test_p_and_ap_rhs_identical(self, small_case):
        mesh, setup, _ = small_case
        np.testing.assert_array_equal(asm.assemble_rhs_fluct(mesh, setup, "P"),
                                      asm.assemble_rhs_fluct(mesh, setup, "AP"))

    def test_apl_rhs_requires_split_and_skips_omega2(self, small_case):
        mesh, setup, split = small_case
        with pytest.raises(ValueError):
            asm.assemble_rhs_fluct(mesh, setup, "APL")
        got = asm.assemble_rhs_fluct(mesh, setup, "APL", split)
        assert got.shape == (mesh.nx * split.mz,)
        # interior rows far above the interface agree with the full version
        full = asm.assemble_rhs_fluct(mesh, setup, "AP")
        lay1 = asm.fluct_layout(mesh, split, 1)
        lay = asm.fluct_layout(mesh, None, "full")
        for i in range(1, mesh.nx + 1):
            for k in range(split.iota + 1, mesh.nz + 2):
                assert got[lay1.fluct_flat(i, k)] == pytest.approx(
                    full[lay.fluct_flat(i, k)], rel=1e-12)


class TestStructure:
    @pytest.mark.parametrize("nx,nz", [(2, 2), (3, 7), (8, 5), (13, 13)])
    def test_nnz_formulas(self, nx, nz):
        mesh = build_mesh(DOMAIN_B, nx, nz)
        setup = make_setup("a", DOMAIN_B, EpsProfile.tanh_profile(1e-4, 1.0))
        p = asm.assemble_form("a_xf", mesh, setup) + asm.assemble_form("a_z", mesh, setup)
        assert p.nnz == (3 * nz + 4) * (3 * nx - 2)

    def test_symmetry(self, small_case):
        mesh, setup, split = small_case
        for name in ("a_z", "a_xf", "a_xa"):
            a = asm.assemble_form(name, mesh, setup)
            diff = np.abs((a - a.T).toarray()).max()
            assert diff <= 1e-13 * max(np.abs(a.toarray()).max(), 1.0)

    def test_explicit_zeros_kept(self):
        # with a z-independent A_x the mean-coupling coefficient A_x - <A_x>
        # vanishes identically; the entries must stay stored as explicit
        # zeros so block patterns are mesh-determined, not data-dependent
        mesh = build_mesh(DOMAIN_A, 3, 3)
        setup = make_setup("zero-fluct", DOMAIN_A, EpsProfile.constant(1.0))
        c_a = asm.assemble_form("c_a", mesh, setup)
        assert c_a.nnz > 0
        assert np.count_nonzero(c_a.toarray()) == 0

    def test_d_iota_rejected(self, small_case):
        mesh, setup, split = small_case
        with pytest.raises(ValueError, match="never assembled"):
            asm.assemble_form("d_iota", mesh, setup, split, 2)

    def test_unknown_form_rejected(self, small_case):
        mesh, setup, _ = small_case
        with pytest.raises(ValueError):
            asm.assemble_form("a_zz", mesh, setup)


class TestZlineAverage:
    def test_constant_in_z(self):
        mesh = build_mesh(DOMAIN_B, 4, 6)
        avg = asm.zline_average(lambda x, z: x ** 2 + 0.0 * z, mesh)
        x = np.linspace(0.1, 0.9, 5)
        np.testing.assert_allclose(avg(x), x ** 2, rtol=1e-13)

    def test_linear_in_z_averages_to_midpoint(self):
        mesh = build_mesh(DOMAIN_B, 4, 6)
        avg = asm.zline_average(lambda x, z: z + 0.0 * x, mesh)
        mid = 0.5 * (DOMAIN_B.z_minus + DOMAIN_B.z_plus)
        np.testing.assert_allclose(avg(np.array([0.3])), [mid], atol=1e-13)

    def test_matches_loop_oracle(self):
        mesh = build_mesh(DOMAIN_B, 3, 5)
        setup = make_setup("a", DOMAIN_B, EpsProfile.constant(1.0))
        avg = asm.zline_average(setup.coeffs.a_x, mesh)
        for x in (0.0, 0.37, 1.0):
            assert avg(np.array([x]))[0] == pytest.approx(
                zbar(setup.coeffs.a_x, x, mesh), rel=1e-13)
