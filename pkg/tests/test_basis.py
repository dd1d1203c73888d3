import numpy as np
import pytest

from aniso_hybrid.basis import gauss_rule, p1_eval, q1_eval


class TestGaussRule:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_weights_sum_to_two(self, n):
        rule = gauss_rule(n)
        assert np.sum(rule.weights) == pytest.approx(2.0, abs=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_polynomial_exactness(self, n):
        # exact for monomials up to degree 2n - 1
        rule = gauss_rule(n)
        for deg in range(2 * n):
            exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
            approx = np.sum(rule.weights * rule.points ** deg)
            assert approx == pytest.approx(exact, abs=1e-15)

    def test_three_point_degree_five(self):
        # the default rule integrates t^5 exactly (odd: 0) and t^4 exactly
        rule = gauss_rule(3)
        assert np.sum(rule.weights * rule.points ** 5) == pytest.approx(0.0, abs=1e-15)
        assert np.sum(rule.weights * rule.points ** 4) == pytest.approx(2.0 / 5.0, abs=1e-15)

    def test_rejects_unsupported(self):
        with pytest.raises(ValueError):
            gauss_rule(0)
        with pytest.raises(ValueError):
            gauss_rule(6)


class TestP1:
    def test_partition_of_unity(self):
        xi = np.linspace(-1.0, 1.0, 101)
        values, _ = p1_eval(xi)
        assert np.max(np.abs(values.sum(axis=0) - 1.0)) <= 1e-14

    def test_gradients_sum_to_zero(self):
        xi = np.linspace(-1.0, 1.0, 11)
        _, grads = p1_eval(xi)
        assert np.max(np.abs(grads.sum(axis=0))) <= 1e-15

    def test_nodal_values(self):
        values, _ = p1_eval(np.array([-1.0, 1.0]))
        assert values[0, 0] == 1.0 and values[0, 1] == 0.0
        assert values[1, 0] == 0.0 and values[1, 1] == 1.0


class TestQ1:
    def test_partition_of_unity(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            pt = rng.uniform(-1.0, 1.0, size=2)
            values, grads = q1_eval(pt)
            assert np.abs(values.sum() - 1.0) <= 1e-14
            assert np.max(np.abs(grads.sum(axis=0))) <= 1e-14

    def test_kronecker_at_corners(self):
        corners = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
        for j, c in enumerate(corners):
            values, _ = q1_eval(c)
            expected = np.zeros(4)
            expected[j] = 1.0
            np.testing.assert_allclose(values, expected, atol=1e-15)

    def test_reproduces_bilinear_function(self):
        # Q1 must reproduce a + b xi + c eta + d xi eta exactly
        corners = np.array([(-1, -1), (1, -1), (1, 1), (-1, 1)], dtype=float)
        a, b, c, d = 0.3, -1.2, 0.7, 2.1
        fvals = a + b * corners[:, 0] + c * corners[:, 1] \
            + d * corners[:, 0] * corners[:, 1]
        rng = np.random.default_rng(11)
        for _ in range(20):
            xi, eta = rng.uniform(-1.0, 1.0, size=2)
            values, grads = q1_eval((xi, eta))
            assert values @ fvals == pytest.approx(a + b * xi + c * eta + d * xi * eta,
                                                   abs=1e-13)
            assert grads[:, 0] @ fvals == pytest.approx(b + d * eta, abs=1e-13)
            assert grads[:, 1] @ fvals == pytest.approx(c + d * xi, abs=1e-13)
