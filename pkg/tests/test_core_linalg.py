import numpy as np
import pytest

from kyfan2k.core_linalg import MeasurementOperator, OperatorDegenerateError, svd


def random_operator(rng, m, n, s, scale=1.0):
    sensing = rng.normal(size=(s, m, n)) * scale
    rhs = rng.normal(size=s)
    rhs[0] += 3.0  # keep b nonzero
    return MeasurementOperator(sensing, rhs)


class TestSvd:
    def test_identity(self):
        fac = svd(np.eye(2))
        assert np.allclose(fac.sigma, [1.0, 1.0])

    def test_sorted_diagonal(self):
        fac = svd(np.diag([3.0, 4.0]))
        assert np.allclose(fac.sigma, [4.0, 3.0])

    def test_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(5, 4))
        fac = svd(X)
        rel = np.linalg.norm(fac.reconstruct() - X) / np.linalg.norm(X)
        assert rel <= 1e-10
        assert np.linalg.norm(fac.U.T @ fac.U - np.eye(4)) <= 1e-10
        assert np.linalg.norm(fac.V.T @ fac.V - np.eye(4)) <= 1e-10
        assert np.all(np.diff(fac.sigma) <= 0)
        assert np.all(fac.sigma >= 0)

    def test_rejects_non_finite(self):
        X = np.ones((3, 3))
        X[1, 1] = np.nan
        with pytest.raises(ValueError):
            svd(X)


class TestApplyAdjoint:
    def test_coordinate_functional(self):
        sensing = np.zeros((1, 3, 4))
        sensing[0, 0, 0] = 1.0
        op = MeasurementOperator(sensing, [1.0])
        X = np.arange(12.0).reshape(3, 4) + 5
        assert op.apply(X) == pytest.approx([X[0, 0]])

    def test_zero_matrix_maps_to_zero(self):
        rng = np.random.default_rng(1)
        op = random_operator(rng, 3, 4, 5)
        assert np.all(op.apply(np.zeros((3, 4))) == 0)

    def test_adjoint_unit_vector_and_zero(self):
        rng = np.random.default_rng(2)
        op = random_operator(rng, 3, 4, 5)
        e1 = np.zeros(5)
        e1[0] = 1.0
        assert np.array_equal(op.adjoint(e1), op.sensing[0])
        assert np.all(op.adjoint(np.zeros(5)) == 0)

    def test_adjoint_identity_against_double_summation(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            m, n = rng.integers(2, 7, size=2)
            s = int(rng.integers(1, m * n + 1))
            op = random_operator(rng, int(m), int(n), s)
            X = rng.normal(size=(m, n))
            y = rng.normal(size=s)
            lhs = float(op.apply(X) @ y)
            # independent oracle: explicit double summation
            rhs = 0.0
            for i in range(s):
                for a in range(m):
                    for b in range(n):
                        rhs += y[i] * op.sensing[i, a, b] * X[a, b]
            assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))
            assert abs(float(np.vdot(X, op.adjoint(y))) - lhs) <= 1e-12 * (1 + abs(lhs))

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(4)
        op = random_operator(rng, 3, 4, 5)
        with pytest.raises(ValueError):
            op.apply(np.zeros((4, 3)))
        with pytest.raises(ValueError):
            op.adjoint(np.zeros(4))


class TestProjection:
    def test_feasible_point_unchanged(self):
        rng = np.random.default_rng(5)
        op = random_operator(rng, 4, 5, 7)
        Z = op.project_affine(rng.normal(size=(4, 5)))
        again = op.project_affine(Z)
        assert np.linalg.norm(again - Z) <= 1e-12 * (1 + np.linalg.norm(Z))

    def test_trace_hyperplane_analytic(self):
        # single sensing matrix = identity: projection shifts the trace
        n, t = 4, 2.5
        op = MeasurementOperator(np.eye(n)[None, :, :], [t])
        rng = np.random.default_rng(6)
        X = rng.normal(size=(n, n))
        expected = X - ((np.trace(X) - t) / n) * np.eye(n)
        assert np.allclose(op.project_affine(X), expected, atol=1e-12)

    def test_projection_residual(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            op = random_operator(rng, 5, 6, 12)
            P = op.project_affine(rng.normal(size=(5, 6)) * 10)
            assert np.max(np.abs(op.apply(P) - op.rhs)) <= 1e-8

    def test_projection_is_orthogonal(self):
        rng = np.random.default_rng(8)
        op = random_operator(rng, 5, 4, 9)
        X = rng.normal(size=(5, 4)) * 3
        P = op.project_affine(X)
        for _ in range(20):
            Z = op.project_affine(rng.normal(size=(5, 4)))
            assert float(np.vdot(X - P, Z - P)) <= 1e-8 * (1 + float(np.vdot(X, X)))

    def test_nullspace_projection(self):
        rng = np.random.default_rng(9)
        op = random_operator(rng, 4, 4, 6)
        Y = op.project_nullspace(rng.normal(size=(4, 4)))
        assert np.max(np.abs(op.apply(Y))) <= 1e-10


class TestConstruction:
    def test_gram_solver_reproduces_gram(self):
        rng = np.random.default_rng(10)
        op = random_operator(rng, 4, 5, 8)
        for _ in range(10):
            y = rng.normal(size=8)
            v = op.gram @ y
            assert np.linalg.norm(op.solve_gram(v) - y) <= 1e-10 * (1 + np.linalg.norm(y))

    def test_duplicate_sensing_is_degenerate(self):
        rng = np.random.default_rng(11)
        A = rng.normal(size=(1, 3, 3))
        sensing = np.concatenate([A, A])
        with pytest.raises(OperatorDegenerateError):
            MeasurementOperator(sensing, [1.0, 1.0])

    def test_zero_rhs_rejected(self):
        rng = np.random.default_rng(12)
        with pytest.raises(ValueError):
            MeasurementOperator(rng.normal(size=(2, 3, 3)), [0.0, 0.0])

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            MeasurementOperator(np.zeros((2, 3)), [1.0])
        rng = np.random.default_rng(13)
        with pytest.raises(ValueError):
            MeasurementOperator(rng.normal(size=(2, 3, 3)), [1.0])
