import numpy as np
import pytest

from rsgd import (
    FiniteSampleSpace,
    RegularizedLeastSquaresProblem,
    SphereMeanProblem,
    UnboundedRegion,
    load_least_squares_csv,
    load_sphere_mean_csv,
    random_least_squares,
    random_sphere_mean,
)


class TestFiniteSampleSpace:
    def test_uniform(self):
        s = FiniteSampleSpace.uniform(4)
        assert s.size == 4 and s.is_uniform
        np.testing.assert_allclose(s.cumulative, [0.25, 0.5, 0.75, 1.0])

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            FiniteSampleSpace(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            FiniteSampleSpace(np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            FiniteSampleSpace.uniform(0)


class TestSphereMeanCost:
    def test_single_target_at_point(self):
        p = SphereMeanProblem(np.array([[0.0, 0.0, 1.0]]))
        assert p.cost(np.array([0.0, 0.0, 1.0])) == pytest.approx(0.0, abs=1e-15)

    def test_antipodal_target(self):
        p = SphereMeanProblem(np.array([[1.0, 0.0, 0.0]]))
        assert p.cost(np.array([-1.0, 0.0, 0.0])) == pytest.approx(2.0)

    def test_matches_direct_sum(self):
        p = random_sphere_mean(4, 6, seed=0)
        rng = np.random.default_rng(1)
        for x in p.manifold.random_point(rng, 20):
            direct = 0.5 * ((x - p.targets) ** 2).sum(axis=1).mean()
            assert p.cost(x) == pytest.approx(direct, rel=1e-12)


class TestLeastSquaresCost:
    def test_worked_value(self):
        p = RegularizedLeastSquaresProblem(np.array([[1.0, 0.0]]), np.array([0.0]), tau=1.0)
        # residual 2 -> 2, regularizer 0.5 * 4 -> 2
        assert p.cost(np.array([2.0, 0.0])) == pytest.approx(4.0)

    def test_stationary_at_zero_when_labels_zero(self):
        p = RegularizedLeastSquaresProblem(np.array([[1.0, 0.0]]), np.array([0.0]), tau=1.0)
        np.testing.assert_array_equal(p.full_gradient(np.zeros(2)), np.zeros(2))

    def test_requires_positive_tau(self):
        with pytest.raises(ValueError):
            RegularizedLeastSquaresProblem(np.array([[1.0]]), np.array([0.0]), tau=0.0)


@pytest.mark.parametrize("problem", [
    random_sphere_mean(4, 6, seed=3),
    random_least_squares(3, 6, seed=3, tau=0.3, region_rho1=4.0),
], ids=["sphere_mean", "least_squares"])
class TestGradients:
    def test_finite_difference_directional(self, problem):
        # oracle: central differences of the cost along tangent directions
        man = problem.manifold
        rng = np.random.default_rng(4)
        h = 1e-6
        for _ in range(10):
            x = problem.sample_region(rng, 1)[0]
            w = man.project_tangent(x, rng.normal(size=x.shape))
            w = w / man.norm(x, w)
            fd = (problem.cost(man.retract(x, h * w)) - problem.cost(man.retract(x, -h * w))) / (2 * h)
            ip = man.inner(x, problem.full_gradient(x), w)
            assert fd == pytest.approx(ip, rel=1e-5, abs=1e-8)

    def test_enumeration_reproduces_full_gradient(self, problem):
        w = problem.space.weights
        rng = np.random.default_rng(5)
        for x in problem.sample_region(rng, 50):
            table = problem.sample_gradients(x, np.arange(problem.space.size))
            dev = (w[:, None] * table).sum(axis=0) - problem.full_gradient(x)
            assert np.sqrt((dev**2).sum()) <= 1e-10

    def test_single_outcome_equals_full(self, problem):
        sub = type(problem)
        if sub is SphereMeanProblem:
            one = SphereMeanProblem(problem.targets[:1])
        else:
            one = RegularizedLeastSquaresProblem(
                problem.features[:1], problem.labels[:1], problem.tau, region_rho1=4.0)
        x = one.sample_region(np.random.default_rng(6), 1)[0]
        np.testing.assert_allclose(one.sample_gradient(x, 0), one.full_gradient(x), atol=1e-12)

    def test_sample_gradients_are_tangent(self, problem):
        man = problem.manifold
        rng = np.random.default_rng(7)
        x = problem.sample_region(rng, 40)
        idx = rng.integers(0, problem.space.size, size=(40, 3))
        grads = problem.sample_gradients(x, idx)
        for j in range(3):
            assert np.all(man.is_tangent(x, grads[:, j, :]))

    def test_index_out_of_range(self, problem):
        x = problem.sample_region(np.random.default_rng(8), 1)[0]
        with pytest.raises(IndexError):
            problem.sample_gradient(x, problem.space.size)
        with pytest.raises(IndexError):
            problem.sample_gradient(x, -1)


class TestGradientBound:
    def test_sphere_unit_targets(self):
        p = random_sphere_mean(4, 8, seed=9)
        assert p.gradient_bound() == pytest.approx(3.0)
        rng = np.random.default_rng(10)
        x = p.sample_region(rng, 1000)
        idx = rng.integers(0, 8, size=(1000, 1))
        norms = np.sqrt((p.sample_gradients(x, idx)[:, 0, :] ** 2).sum(axis=1))
        assert norms.max() <= 3.0

    def test_least_squares_worked_value(self):
        p = RegularizedLeastSquaresProblem(np.array([[1.0, 0.0]]), np.array([1.0]), tau=0.1)
        assert p.gradient_bound(rho1=4.0) == pytest.approx(3.2)

    def test_bound_holds_on_ball(self):
        p = random_least_squares(3, 6, seed=11, tau=0.3, region_rho1=4.0)
        bound = p.gradient_bound()
        rng = np.random.default_rng(12)
        x = p.sample_region(rng, 10000)
        idx = rng.integers(0, 6, size=(10000, 1))
        norms = np.sqrt((p.sample_gradients(x, idx)[:, 0, :] ** 2).sum(axis=1))
        assert norms.max() <= bound

    def test_sphere_bound_holds_everywhere(self):
        p = random_sphere_mean(5, 7, seed=13)
        bound = p.gradient_bound()
        rng = np.random.default_rng(14)
        x = p.sample_region(rng, 10000)
        idx = rng.integers(0, 7, size=(10000, 1))
        norms = np.sqrt((p.sample_gradients(x, idx)[:, 0, :] ** 2).sum(axis=1))
        assert norms.max() <= bound

    def test_unbounded_region_rejected(self):
        p = random_least_squares(3, 6, seed=15, tau=0.3)
        with pytest.raises(UnboundedRegion):
            p.gradient_bound()
        with pytest.raises(UnboundedRegion):
            p.sample_region(np.random.default_rng(0), 5)


class TestStationaryPoint:
    def test_gradient_vanishes_at_projected_mean(self):
        p = random_sphere_mean(4, 10, seed=16)
        xstar = p.target_mean / np.linalg.norm(p.target_mean)
        assert np.linalg.norm(p.full_gradient(xstar)) <= 1e-14


class TestCsvLoading:
    def test_sphere_round_trip(self, tmp_path):
        path = tmp_path / "targets.csv"
        path.write_text("a1,a2,a3\n1,0,0\n0,1,0\n")
        p = load_sphere_mean_csv(path)
        np.testing.assert_array_equal(p.targets, [[1, 0, 0], [0, 1, 0]])

    def test_least_squares_round_trip(self, tmp_path):
        path = tmp_path / "rows.csv"
        path.write_text("a1,a2,y\n1,0,0.5\n0,2,-1\n")
        p = load_least_squares_csv(path, tau=0.1)
        np.testing.assert_array_equal(p.features, [[1, 0], [0, 2]])
        np.testing.assert_array_equal(p.labels, [0.5, -1.0])

    def test_header_required(self, tmp_path):
        path = tmp_path / "bare.csv"
        path.write_text("1,0,0\n0,1,0\n")
        with pytest.raises(ValueError, match="header"):
            load_sphere_mean_csv(path)

    def test_bad_cell_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a1,a2\n1,oops\n")
        with pytest.raises(ValueError):
            load_sphere_mean_csv(path)


def test_data_seed_recorded():
    assert random_sphere_mean(3, 4, seed=42).data_seed == 42
    assert random_least_squares(3, 4, seed=42, tau=0.1).data_seed == 42
