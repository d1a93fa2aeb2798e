import numpy as np
import pytest

from handfit.errors import ContractError
from handfit.fitting import DoglegOptions, solve_dogleg


def rosenbrock_residuals(x):
    # E(x) = (1 - x0)^2 + 100 (x1 - x0^2)^2 as two least-squares residuals
    r = np.array([1.0 - x[0], 10.0 * (x[1] - x[0] ** 2)])
    jac = np.array([[-1.0, 0.0], [-20.0 * x[0], 10.0]])
    return r, jac


def linear_residuals(a, b):
    def fn(x):
        return a @ x - b, a
    return fn


def test_rosenbrock_converges_to_unit_minimum():
    result = solve_dogleg(rosenbrock_residuals, np.array([-1.2, 1.0]),
                          DoglegOptions())
    np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-8)
    assert result.termination in ("gradient", "step")


def test_already_optimal_start_exits_immediately():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 3))
    x_star = rng.normal(size=3)
    result = solve_dogleg(linear_residuals(a, a @ x_star), x_star)
    assert result.termination == "gradient"
    assert result.iterations <= 1


def test_linear_problem_single_gauss_newton_step():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(8, 4))
    x_star = rng.normal(size=4)
    fn = linear_residuals(a, a @ x_star)
    result = solve_dogleg(fn, x_star + 0.1, DoglegOptions(trust_radius_init=10.0))
    np.testing.assert_allclose(result.x, x_star, atol=1e-10)


def test_accepted_objective_monotonicity():
    result = solve_dogleg(rosenbrock_residuals, np.array([-1.2, 1.0]))
    accepted = [rec.objective for rec in result.trace if rec.accepted]
    assert all(b <= a for a, b in zip(accepted, accepted[1:]))
    # trace objective is pre-step; the final objective continues the decrease
    assert result.objective <= accepted[-1]


def test_rank_deficient_falls_back_to_cauchy():
    # duplicate column makes J^T J singular at every point
    def fn(x):
        r = np.array([x[0] + x[1] - 1.0, 2.0 * (x[0] + x[1]) - 2.0])
        jac = np.array([[1.0, 1.0], [2.0, 2.0]])
        return r, jac

    result = solve_dogleg(fn, np.array([5.0, -2.0]), DoglegOptions(max_iter=100))
    assert result.objective < 1e-16
    assert np.isfinite(result.x).all()


def test_nonfinite_initial_jacobian_aborts():
    def fn(x):
        return np.array([x[0]]), np.array([[np.nan]])

    result = solve_dogleg(fn, np.array([1.0]))
    assert result.termination == "nonfinite"


def test_nonfinite_initial_point_rejected():
    with pytest.raises(ContractError):
        solve_dogleg(rosenbrock_residuals, np.array([np.nan, 0.0]))


def test_trust_region_updates_follow_rho_rules():
    radii = []

    def fn(x):
        return rosenbrock_residuals(x)

    result = solve_dogleg(fn, np.array([-1.2, 1.0]), DoglegOptions(max_iter=50))
    radii = [(rec.trust_radius, rec.accepted) for rec in result.trace]
    assert len(radii) > 2
    # every rejected step must be followed by a strictly smaller radius
    for (r0, acc), (r1, _) in zip(radii, radii[1:]):
        if not acc:
            assert r1 < r0
