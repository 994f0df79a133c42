import numpy as np
import pytest

from sparsebreaks.errors import InvalidSchedule, UnstableSystem
from sparsebreaks.synth import (
    SyntheticScenario,
    VecScenario,
    generate_panel,
    generate_vecm,
    make_rng,
    stationary_radius,
    vecm_companion,
)


def test_philox_reference_stream():
    rng = make_rng(0)
    np.testing.assert_array_equal(
        rng.random(3), [0.014067035665647709, 0.2577672456246177, 0.47156538101528966]
    )
    np.testing.assert_array_equal(rng.integers(0, 2**32, 3), [2650960797, 392644497, 713897366])
    np.testing.assert_array_equal(
        make_rng(0).standard_normal(3),
        [-0.2059740286292238, -0.12884495093462758, -0.28978987549091256],
    )


def test_panel_is_deterministic():
    sc = SyntheticScenario(seed=9, periods=12, obs_dim=2, coef_dim=3, jump_schedule=[(5, np.ones(3))])
    (p1, t1), (p2, t2) = generate_panel(sc), generate_panel(sc)
    np.testing.assert_array_equal(p1.responses, p2.responses)
    np.testing.assert_array_equal(t1.betas, t2.betas)
    other, _ = generate_panel(SyntheticScenario(seed=10, periods=12, obs_dim=2, coef_dim=3))
    assert not np.array_equal(other.responses, p1.responses)


def test_truth_path_and_noise_free_response():
    sc = SyntheticScenario(
        seed=1, periods=6, obs_dim=2, coef_dim=2, base_beta=[1.0, 0.0],
        jump_schedule=[(3, [0.0, 2.0]), (5, [-1.0, 0.0])], noise_scale=0.0,
    )
    panel, truth = generate_panel(sc)
    np.testing.assert_array_equal(truth.betas[:, 0], [1, 1, 1, 1, 0, 0])
    np.testing.assert_array_equal(truth.betas[:, 1], [0, 0, 2, 2, 2, 2])
    np.testing.assert_allclose(panel.responses, np.einsum("tmn,tn->tm", panel.design_blocks, truth.betas))


def test_constant_design():
    panel, _ = generate_panel(SyntheticScenario(seed=0, periods=4, obs_dim=1, coef_dim=2, design="constant"))
    assert np.all(panel.design_blocks == 1.0)


@pytest.mark.parametrize(
    "schedule",
    [[(1, np.ones(2))], [(7, np.ones(2))], [(3, np.ones(3))], [(2.5, np.ones(2))]],
)
def test_bad_schedule(schedule):
    with pytest.raises(InvalidSchedule):
        generate_panel(SyntheticScenario(seed=0, periods=6, obs_dim=1, coef_dim=2, jump_schedule=schedule))


def test_bad_panel_scenarios():
    with pytest.raises(InvalidSchedule):
        generate_panel(SyntheticScenario(seed=0, periods=0, obs_dim=1, coef_dim=1))
    with pytest.raises(InvalidSchedule):
        generate_panel(SyntheticScenario(seed=0, periods=3, obs_dim=1, coef_dim=1, noise_scale=-1.0))
    with pytest.raises(InvalidSchedule):
        generate_panel(SyntheticScenario(seed=0, periods=3, obs_dim=1, coef_dim=2, base_beta=[1.0]))


def test_companion_of_scalar_vec():
    # dx_t = g dx_{t-1} + p x_{t-1}  <=>  x_t = (1 + g + p) x_{t-1} - g x_{t-2}
    comp = vecm_companion([[[0.5]]], [[-0.2]])
    np.testing.assert_allclose(comp, [[1.3, -0.5], [1.0, 0.0]])


def test_stationary_radius_drops_unit_roots():
    gammas = np.zeros((1, 2, 2))
    pi = np.array([[-0.5, 0.5], [0.0, 0.0]])
    assert stationary_radius(gammas, pi) == pytest.approx(0.5)
    assert stationary_radius(gammas, np.zeros((2, 2))) == pytest.approx(0.0, abs=1e-12)


def _vec_scenario(**kw):
    base = dict(
        seed=0, gammas=np.zeros((1, 2, 2)), pi=np.array([[-0.5, 0.5], [0.0, 0.0]]), length=50
    )
    base.update(kw)
    return VecScenario(**base)


def test_vec_truth_schedule():
    jump = np.array([[-0.3, 0.3], [0.0, 0.0]])
    x, truth = generate_vecm(_vec_scenario(pi_jumps=[(20, jump)]))
    assert x.shape == (50, 2)
    assert truth.pis.shape == (48, 2, 2)
    np.testing.assert_array_equal(truth.pis[18], truth.pis[0])
    np.testing.assert_allclose(truth.pis[19], truth.pis[0] + jump)
    x2, _ = generate_vecm(_vec_scenario(pi_jumps=[(20, jump)]))
    np.testing.assert_array_equal(x, x2)


def test_vec_recursion_matches_definition():
    sc = _vec_scenario(mu=[0.1, -0.2], gammas=np.array([[[0.2, 0.0], [0.1, 0.3]]]))
    x, truth = generate_vecm(sc)
    dx = np.diff(x, axis=0)
    pred = dx[:-1] @ truth.gammas[0].T + x[1:-1] @ truth.pis[0].T + truth.mu
    innov = dx[1:] - pred
    assert innov.std() == pytest.approx(1.0, rel=0.25)
    exact, _ = generate_vecm(_vec_scenario(mu=[0.1, -0.2], gammas=sc.gammas, noise_scale=0.0))
    d = np.diff(exact, axis=0)
    np.testing.assert_allclose(d[1:], d[:-1] @ truth.gammas[0].T + exact[1:-1] @ truth.pis[0].T + truth.mu,
                               atol=1e-12)


def test_explosive_regime_rejected():
    # x_t = 1.05 x_{t-1} in the first coordinate
    with pytest.raises(UnstableSystem):
        generate_vecm(_vec_scenario(pi=np.array([[0.05, 0.0], [0.0, 0.0]])))
    jump = np.array([[-1.6, 1.6], [0.0, 0.0]])
    with pytest.raises(UnstableSystem):
        generate_vecm(_vec_scenario(pi_jumps=[(10, jump)]))


def test_vec_scenario_validation():
    with pytest.raises(InvalidSchedule):
        generate_vecm(_vec_scenario(noise_chol=np.eye(3)))
    with pytest.raises(InvalidSchedule):
        generate_vecm(_vec_scenario(pi=np.zeros((3, 3))))
    with pytest.raises(InvalidSchedule):
        generate_vecm(_vec_scenario(gammas=np.zeros((2, 2))))
    with pytest.raises(InvalidSchedule):
        generate_vecm(_vec_scenario(length=2))


def test_noise_chol_shapes_innovations():
    chol = np.diag([1.0, 0.0])
    x, _ = generate_vecm(_vec_scenario(pi=np.array([[-0.5, 0.0], [0.0, -0.5]]), noise_chol=chol))
    # second coordinate only decays from its start value
    d = np.diff(x[:, 1])
    np.testing.assert_allclose(d[1:], -0.5 * x[1:-1, 1], atol=1e-12)


def test_zero_pi_gives_small_degrees():
    from sparsebreaks.vecm import VecmSpec, comovement_pipeline

    x, _ = generate_vecm(VecScenario(seed=3, gammas=0.3 * np.eye(2)[None], pi=np.zeros((2, 2)), length=200))
    _, _, como = comovement_pipeline(x, VecmSpec(1, 1), lam=0.5)
    # the OLS noise floor of alpha is O(1/sqrt(T)); a unit-scale loading would be ~1
    assert np.max(como.degrees) < 0.15


def test_constant_rank_one_pi_gives_flat_alpha():
    from sparsebreaks.vecm import VecmSpec, comovement_pipeline

    pi = np.outer([-0.5, 0.0], [1.0, -1.0])
    x, _ = generate_vecm(VecScenario(seed=4, gammas=np.zeros((1, 2, 2)), pi=pi, length=300))
    _, report, como = comovement_pipeline(x, VecmSpec(1, 1))
    spread = np.ptp(como.alphas, axis=0)
    assert np.max(spread) < 0.1
    assert como.degrees.mean() == pytest.approx(np.sqrt(2) * 0.5, rel=0.2)
