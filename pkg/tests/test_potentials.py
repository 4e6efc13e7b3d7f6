import numpy as np
import pytest

from ktula import (DimensionError, EvalOverflowError, NeuralNetObjectiveSpec,
                   ParameterError, eval_grad, eval_hessian, eval_u,
                   load_matrix_csv, load_nn_dataset_csv, make_double_well,
                   make_neural_net_objective, make_quadratic,
                   nn_regularity_constants, spectral_norm, synthetic_nn_spec)
from ktula import numdiff
from conftest import points_in_ball


class TestDoubleWell:
    def test_constants(self):
        c = make_double_well(10).constants
        assert (c.a, c.b, c.L, c.l, c.K_H, c.K_h) == (0.5, 2.25, 3.0, 2, 3.0, 2.0)

    def test_gradient_vanishes_on_unit_sphere(self):
        m = make_double_well(4)
        theta = np.array([1.0, 0.0, 0.0, 0.0])
        assert np.array_equal(eval_grad(m, theta), np.zeros(4))

    def test_gradient_hand_value(self):
        m = make_double_well(2)
        g = eval_grad(m, np.array([2.0, 0.0]))
        assert np.allclose(g, [6.0, 0.0], atol=1e-12)
        fd = numdiff.gradient(m.u, np.array([2.0, 0.0]))
        assert np.allclose(fd, g, rtol=1e-7, atol=1e-7)

    def test_u_and_hessian_hand_values(self):
        m = make_double_well(2)
        assert eval_u(m, np.array([1.0, 0.0])) == pytest.approx(-0.25, abs=1e-15)
        H0 = eval_hessian(m, np.zeros(2))
        assert np.array_equal(H0, -np.eye(2))

    def test_rejects_bad_dimension(self):
        with pytest.raises(DimensionError):
            make_double_well(0)


class TestQuadratic:
    def test_gradient_identity(self):
        m = make_quadratic(2, 1.0)
        assert np.array_equal(eval_grad(m, np.array([3.0, 4.0])), [3.0, 4.0])
        assert np.array_equal(eval_grad(m, np.zeros(2)), np.zeros(2))

    def test_constant_hessian(self):
        m = make_quadratic(3, 2.0)
        for theta in (np.zeros(3), np.array([1.0, -2.0, 0.5])):
            assert np.array_equal(eval_hessian(m, theta), 2.0 * np.eye(3))

    def test_dissipativity_with_tiny_offset(self):
        m = make_quadratic(2, 1.0)
        theta = np.array([1.0, 1.0])
        lhs = float(eval_grad(m, theta) @ theta)
        assert lhs >= m.constants.a * 2.0 - m.constants.b
        assert m.constants.b == 1e-12

    def test_rejects_nonpositive_coefficient(self):
        with pytest.raises(ParameterError):
            make_quadratic(2, 0.0)
        with pytest.raises(ParameterError):
            make_quadratic(2, -1.0)


class TestEvalOps:
    def test_dimension_mismatch(self):
        m = make_double_well(3)
        with pytest.raises(DimensionError):
            eval_u(m, np.zeros(2))
        with pytest.raises(DimensionError):
            eval_grad(m, np.zeros(4))

    def test_overflow_names_the_evaluator(self):
        m = make_double_well(1)
        huge = np.array([1e160])
        with pytest.raises(EvalOverflowError) as err:
            eval_u(m, huge)
        assert err.value.evaluator == "u"

    def test_hessian_symmetry(self, bundled_models):
        for m in bundled_models:
            for theta in points_in_ball(20, m.dimension, 3.0, seed=5):
                H = eval_hessian(m, theta)
                scale = max(1.0, float(np.max(np.abs(H))))
                assert np.max(np.abs(H - H.T)) <= 1e-12 * scale


class TestGrowthAndDissipativity:
    """The declared constants actually certify the inequalities on a seeded
    cloud of 1000 points with |theta| <= 10, for every bundled model."""

    def test_inequalities_hold(self, bundled_models):
        for m in bundled_models:
            c = m.constants
            pts = points_in_ball(1000, m.dimension, 10.0, seed=99)
            for theta in pts:
                r = float(np.linalg.norm(theta))
                h = m.grad(theta)
                assert float(h @ theta) >= c.a * r ** 2 - c.b - 1e-9
                assert np.linalg.norm(h) <= c.K_h * (1.0 + r ** (c.l + 1)) + 1e-9
            for theta in pts[::20]:
                r = float(np.linalg.norm(theta))
                hn = spectral_norm(m.hessian(theta))
                assert hn <= c.K_H * (1.0 + r ** c.l) * (1.0 + 1e-9) + 1e-9

    def test_gradient_matches_finite_differences(self, bundled_models):
        for m in bundled_models:
            for theta in points_in_ball(25, m.dimension, 3.0, seed=11):
                fd = numdiff.gradient(m.u, theta, step=1e-5)
                err = numdiff.max_relative_error(fd, m.grad(theta))
                assert err < 1e-5, f"{m.label}: gradient mismatch {err}"

    def test_hessian_matches_finite_differences(self, bundled_models):
        for m in bundled_models:
            for theta in points_in_ball(10, m.dimension, 3.0, seed=12):
                fd = numdiff.jacobian(m.grad, theta, step=1e-5)
                err = numdiff.max_relative_error(fd, m.hessian(theta))
                assert err < 1e-5, f"{m.label}: hessian mismatch {err}"

    def test_local_lipschitz_gradient_bound(self, bundled_models):
        for m in bundled_models:
            c = m.constants
            pts = points_in_ball(200, m.dimension, 6.0, seed=13)
            for x, y in zip(pts[:-1], pts[1:]):
                lhs = np.linalg.norm(m.grad(x) - m.grad(y))
                bound = c.K_H * (1.0 + np.linalg.norm(x) + np.linalg.norm(y)) ** c.l \
                    * np.linalg.norm(x - y)
                assert lhs <= bound + 1e-9


class TestNeuralNetObjective:
    def test_zero_parameters_zero_gradient_single_point(self):
        # one data point at z=0 with y=1: every gradient factor carries a
        # zero pre-activation or zero weight, so the gradient vanishes
        spec = NeuralNetObjectiveSpec(
            c0=np.array([[1.0, 0.5]]), eta=1.0,
            inputs=np.zeros((1, 2)), targets=np.array([1.0]))
        m = make_neural_net_objective(spec)
        g = eval_grad(m, np.zeros(2))
        assert np.allclose(g, 0.0, atol=1e-15)

    def test_u_at_zero_is_mean_squared_target(self, nn_spec_small, nn_model_small):
        theta = np.zeros(nn_model_small.dimension)
        expected = float(np.mean(nn_spec_small.targets ** 2))
        assert eval_u(nn_model_small, theta) == pytest.approx(expected, rel=1e-14)

    def test_gradient_fd_absolute_deviation(self):
        spec = synthetic_nn_spec(d1=3, input_dim=3, n_points=8, seed=20, eta=1.0)
        m = make_neural_net_objective(spec)
        rng = np.random.default_rng(21)
        for _ in range(20):
            theta = rng.uniform(-1.5, 1.5, size=m.dimension)
            fd = numdiff.gradient(m.u, theta, step=1e-5)
            assert np.max(np.abs(fd - m.grad(theta))) < 1e-6

    def test_batch_gradient_matches_single(self, nn_model_small):
        pts = points_in_ball(40, nn_model_small.dimension, 2.0, seed=30)
        batch = nn_model_small.grad_batch(pts)
        single = np.stack([nn_model_small.grad(p) for p in pts])
        assert np.allclose(batch, single, rtol=1e-13, atol=1e-13)
        ub = nn_model_small.u_batch(pts)
        us = np.array([nn_model_small.u(p) for p in pts])
        assert np.allclose(ub, us, rtol=1e-13, atol=1e-13)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ParameterError):
            NeuralNetObjectiveSpec(c0=np.ones((1, 1)), eta=1.0,
                                   inputs=np.zeros((0, 1)), targets=np.zeros(0))

    def test_all_zero_input_weights_rejected(self):
        with pytest.raises(ParameterError):
            NeuralNetObjectiveSpec(c0=np.zeros((2, 2)), eta=1.0,
                                   inputs=np.zeros((1, 2)), targets=np.ones(1))


class TestNNRegularityConstants:
    def test_growth_degree_and_slope(self, nn_spec_small):
        c = nn_regularity_constants(nn_spec_small)
        assert c.l == 4
        assert c.a == nn_spec_small.eta / 2.0
        spec2 = synthetic_nn_spec(d1=2, input_dim=2, n_points=4, seed=1, eta=2.0)
        assert nn_regularity_constants(spec2).a == 1.0

    def test_gradient_factor_hand_value(self):
        # d1=1, eta=1, single dataset row with |X|=0 and a negligible c0:
        # (48*1 + 1) * 1 * 1 = 49; c0 cannot be exactly zero, so take it tiny
        spec = NeuralNetObjectiveSpec(
            c0=np.array([[1e-300]]), eta=1.0,
            inputs=np.zeros((1, 1)), targets=np.zeros(1))
        c = nn_regularity_constants(spec)
        assert c.K_h == pytest.approx(49.0, rel=1e-12)

    def test_formulas_against_moments(self, nn_spec_small):
        spec = nn_spec_small
        X = np.hstack([spec.inputs, spec.targets[:, None]])
        e1 = np.mean(1 + np.linalg.norm(X, axis=1))
        e2 = np.mean((1 + np.linalg.norm(X, axis=1)) ** 2)
        cnorm = 1 + np.linalg.norm(spec.c0)
        c = nn_regularity_constants(spec)
        d1, eta = spec.hidden, spec.eta
        assert c.L == pytest.approx((320 * d1 ** 2 + 20 * eta) * e1 * cnorm, rel=1e-12)
        assert c.K_H == pytest.approx((256 * d1 ** 2 + 5 * eta) * e2 * cnorm ** 2, rel=1e-12)
        assert c.K_h == pytest.approx((48 * d1 + eta) * e2 * cnorm ** 2, rel=1e-12)


class TestDatasetFiles:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("z_1,z_2,y\n0.5,-1.0,2.0\n1.5,0.25,-0.5\n")
        Z, y = load_nn_dataset_csv(path)
        assert Z.shape == (2, 2)
        assert np.array_equal(y, [2.0, -0.5])

    def test_header_is_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ParameterError):
            load_nn_dataset_csv(path)

    def test_matrix_roundtrip(self, tmp_path):
        path = tmp_path / "c0.csv"
        path.write_text("1.0,2.0\n3.0,4.0\n")
        mat = load_matrix_csv(path)
        assert np.array_equal(mat, [[1.0, 2.0], [3.0, 4.0]])


class TestSpectralNorm:
    def test_matches_dense_norm(self):
        rng = np.random.default_rng(3)
        for d in (1, 2, 5, 8):
            A = rng.standard_normal((d, d))
            S = (A + A.T) / 2
            assert spectral_norm(S, iters=200) == pytest.approx(
                np.linalg.norm(S, 2), rel=1e-6)
