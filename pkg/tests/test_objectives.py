import numpy as np
import pytest

from cipheropt.objectives import (
    QuadraticSensorObjective,
    curvature_constants,
    generate_sensor_fusion,
    gradient,
    load_instance,
    optimal_solution,
    problem_from_instance,
    save_instance,
    with_noise,
)


def finite_difference(obj, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (obj.value(x + e) - obj.value(x - e)) / (2 * h)
    return g


@pytest.fixture(scope="module")
def instance():
    return generate_sensor_fusion(m=4, s=3, d=2, omega=0.01, seed=11)


@pytest.fixture(scope="module")
def problem(instance):
    return problem_from_instance(instance)


class TestLocalObjective:
    def test_gradient_matches_finite_differences(self, instance):
        rng = np.random.default_rng(5)
        for i in range(1, instance.m + 1):
            obj = instance.objective(i)
            for _ in range(5):
                x = rng.normal(size=instance.d)
                analytic = obj.gradient(x)
                numeric = finite_difference(obj, x)
                assert np.allclose(analytic, numeric, atol=1e-4)

    def test_value_at_truth_is_noise_energy(self):
        inst = generate_sensor_fusion(m=2, s=3, d=2, omega=0.01, seed=0)
        noiseless = type(inst)(omega=inst.omega, x_tilde=inst.x_tilde,
                               measurements=inst.measurements,
                               noises=tuple(np.zeros(inst.s) for _ in range(inst.m)))
        obj = noiseless.objective(1)
        want = inst.omega * float(inst.x_tilde @ inst.x_tilde)
        assert obj.value(inst.x_tilde) == pytest.approx(want)

    def test_curvature_brackets_sampled_gradients(self, instance):
        # L and mu from the Gram spectrum must bracket the observed
        # gradient variation ||g(x) - g(y)|| / ||x - y||
        rng = np.random.default_rng(9)
        for i in range(1, instance.m + 1):
            big, mu = curvature_constants(instance, i)
            for _ in range(50):
                x, y = rng.normal(size=(2, instance.d))
                num = np.linalg.norm(gradient(instance, i, x) - gradient(instance, i, y))
                den = np.linalg.norm(x - y)
                ratio = num / den
                assert ratio <= big * (1 + 1e-9)
                assert ratio >= mu * (1 - 1e-9)

    def test_dimension_mismatch_rejected(self, instance):
        with pytest.raises(ValueError):
            instance.objective(1).gradient(np.zeros(5))

    def test_nonpositive_regularization_rejected(self):
        with pytest.raises(ValueError):
            QuadraticSensorObjective(np.ones((2, 2)), np.ones(2), 0.0)


class TestGeneration:
    def test_shapes_and_ranges(self, instance):
        assert instance.m == 4 and instance.s == 3 and instance.d == 2
        for mat in instance.measurements:
            assert mat.shape == (3, 2)
            assert np.all(mat >= 0.0) and np.all(mat <= 10.0)
        assert np.all(instance.x_tilde >= 0.0) and np.all(instance.x_tilde <= 1.0)

    def test_same_seed_same_instance(self):
        a = generate_sensor_fusion(m=3, s=2, d=2, omega=0.01, seed=4)
        b = generate_sensor_fusion(m=3, s=2, d=2, omega=0.01, seed=4)
        for ma, mb in zip(a.measurements, b.measurements):
            assert np.array_equal(ma, mb)
        for na, nb in zip(a.noises, b.noises):
            assert np.array_equal(na, nb)

    def test_with_noise_redraws_only_noise(self, instance):
        redrawn = with_noise(instance, seed=99)
        for ma, mb in zip(instance.measurements, redrawn.measurements):
            assert np.array_equal(ma, mb)
        assert np.array_equal(instance.x_tilde, redrawn.x_tilde)
        assert not any(
            np.array_equal(na, nb)
            for na, nb in zip(instance.noises, redrawn.noises)
        )

    def test_problem_curvature_aggregates(self, problem, instance):
        ls = [instance.objective(i).lipschitz for i in range(1, 5)]
        mus = [instance.objective(i).strong_convexity for i in range(1, 5)]
        assert problem.l_hat == pytest.approx(max(ls))
        assert problem.l_bar == pytest.approx(sum(ls) / 4)
        assert problem.mu_hat == pytest.approx(max(mus))
        assert problem.mu_bar == pytest.approx(sum(mus) / 4)
        assert problem.kappa == pytest.approx(max(ls) / (sum(mus) / 4))


class TestOptimalSolution:
    def test_normal_equations_residual(self, problem):
        x_star = optimal_solution(problem)
        total = sum(problem.gradient(i, x_star) for i in range(1, problem.m + 1))
        assert np.linalg.norm(total) <= 1e-10

    def test_matches_gradient_descent(self, problem):
        # independent slow oracle: plain descent on the summed objective
        x = np.zeros(problem.d)
        step = 1.0 / (problem.m * problem.l_hat)
        for _ in range(20000):
            g = sum(problem.gradient(i, x) for i in range(1, problem.m + 1))
            x = x - step * g
        assert np.allclose(x, optimal_solution(problem), atol=1e-8)

    def test_recovery_improves_with_low_noise(self):
        # with tiny noise the minimizer sits near the ground truth, up to
        # the ridge bias of the omega term
        inst = generate_sensor_fusion(m=6, s=4, d=2, omega=0.01, seed=2)
        quiet = type(inst)(omega=inst.omega, x_tilde=inst.x_tilde,
                           measurements=inst.measurements,
                           noises=tuple(n * 1e-6 for n in inst.noises))
        x_star = optimal_solution(problem_from_instance(quiet))
        assert np.linalg.norm(x_star - inst.x_tilde) <= 1e-3


class TestInstanceFiles:
    def test_round_trip(self, tmp_path, instance):
        path = tmp_path / "instance.json"
        save_instance(instance, path)
        loaded = load_instance(path)
        assert loaded.omega == instance.omega
        assert np.array_equal(loaded.x_tilde, instance.x_tilde)
        for ma, mb in zip(loaded.measurements, instance.measurements):
            assert np.array_equal(ma, mb)
        for na, nb in zip(loaded.noises, instance.noises):
            assert np.array_equal(na, nb)

    def test_round_trip_preserves_objective_values(self, tmp_path, instance):
        path = tmp_path / "instance.json"
        save_instance(instance, path)
        loaded = load_instance(path)
        x = np.array([0.3, -0.7])
        for i in range(1, instance.m + 1):
            assert loaded.objective(i).value(x) == instance.objective(i).value(x)
