import numpy as np
import pytest

from kkf.errors import NumericalError
from kkf.filters import GaussianPrior
from kkf.kedmd import KoopmanModel, default_regularization, embedding_init, empirical_cov, fit
from kkf.kernels import Kernel
from kkf.systems import EpidemicSystem, uniform_box_sampler


def _separated_nodes(rng, N, n=2, spacing=1.0):
    """Grid nodes with a little jitter: well separated, so K is well conditioned."""
    side = int(np.ceil(N ** (1.0 / n)))
    grid = np.stack(np.meshgrid(*[np.arange(side)] * n, indexing="ij"), 0).reshape(n, -1)
    return spacing * grid[:, :N] + 0.05 * spacing * rng.uniform(size=(n, N))


def test_lambda_zero_interpolates_nodes(linear3, rng):
    X = _separated_nodes(rng, 64, n=3)
    Xp = linear3.step_batch(X, rng)
    Y = linear3.obs_batch(X, rng)
    model = KoopmanModel.from_data(X, Xp, Y, Kernel("matern12", 1.0), reg=0.0)
    res = model.interpolation_residuals()
    for key in ("U_relative", "C_relative", "B_relative"):
        assert res[key] <= 1e-6
    # lift-back of a node's feature vector returns the node
    np.testing.assert_allclose(model.lift_back(model.embed(X[:, 5])), X[:, 5], atol=1e-8)


def test_matrices_match_independent_regression(rng):
    """Off-node predictions equal kernel ridge regression solved directly."""
    k = Kernel("squared_exponential", 0.8)
    X = rng.uniform(-2, 2, size=(2, 30))
    Xp = np.sin(X)
    Y = X[:1] ** 2
    lam = 1e-3
    model = KoopmanModel.from_data(X, Xp, Y, k, reg=lam)
    x = np.array([0.3, -0.7])
    K = np.array([[k(X[:, i], X[:, j]) for j in range(30)] for i in range(30)])
    phi = np.array([k(X[:, i], x) for i in range(30)])
    w = np.linalg.solve(K + lam * np.eye(30), phi)  # Gram symmetric: coefficients on the data
    np.testing.assert_allclose(model.B @ phi, X @ w, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(model.C @ phi, Y @ w, rtol=1e-9, atol=1e-12)
    Kp = np.array([[k(X[:, i], Xp[:, j]) for j in range(30)] for i in range(30)])
    np.testing.assert_allclose(model.U @ phi, Kp @ w, rtol=1e-9, atol=1e-12)


def test_default_regularization_and_condition():
    K = np.diag([2.0, 4.0])
    assert default_regularization(K) == pytest.approx(3e-8)
    X = np.array([[0.0, 1.0, 2.0]])
    model = KoopmanModel.from_data(X, X, X, Kernel("matern12", 1.0))
    assert model.reg == pytest.approx(1e-8)
    assert 1.0 < model.condition_number() < 10.0


def test_duplicate_nodes_without_regularization_fail():
    X = np.array([[0.0, 0.0, 1.0]])
    with pytest.raises(NumericalError, match="singular"):
        KoopmanModel.from_data(X, X, X, Kernel("matern12", 1.0), reg=0.0)
    # a ridge makes the same data usable
    KoopmanModel.from_data(X, X, X, Kernel("matern12", 1.0), reg=1e-6)


def test_shape_and_argument_checks():
    k = Kernel()
    with pytest.raises(ValueError):
        KoopmanModel.from_data(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), k)
    with pytest.raises(ValueError):
        KoopmanModel.from_data(np.zeros((1, 3)), np.zeros((1, 2)), np.zeros((1, 3)), k)
    with pytest.raises(ValueError):
        KoopmanModel.from_data([[0.0, 1.0]], [[0.0, 1.0]], [[0.0, 1.0]], k, reg=-1.0)


def test_fit_is_deterministic_and_round_trips(tmp_path):
    system = EpidemicSystem("sir")
    sampler = uniform_box_sampler([0, 0, 0], [1, 1, 1])
    a = fit(system, sampler, Kernel("matern12", 0.6), 40, rng=3)
    b = fit(system, sampler, Kernel("matern12", 0.6), 40, rng=3)
    for name in ("X", "X_plus", "Y", "U", "C", "B"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    path = a.save(tmp_path / "model")
    assert path.suffix == ".npz"
    c = KoopmanModel.load(path)
    assert c.kernel == a.kernel and c.reg == a.reg
    for name in ("X", "X_plus", "Y", "U", "C", "B"):
        assert np.array_equal(getattr(a, name), getattr(c, name))
    with pytest.raises(ValueError):
        fit(system, sampler, Kernel(), 1)


def test_empirical_cov_matches_numpy(rng):
    Z = rng.normal(size=(50, 4))
    np.testing.assert_allclose(empirical_cov(Z), np.cov(Z, rowvar=False), rtol=1e-12)
    np.testing.assert_allclose(empirical_cov(Z, map=lambda z: 2 * z), 4 * np.cov(Z, rowvar=False),
                               rtol=1e-12)
    with pytest.raises(ValueError):
        empirical_cov(Z[:1])


def test_embedding_init_point_mass_and_mean(rng):
    X = np.array([[0.0, 1.0, 3.0]])
    model = KoopmanModel.from_data(X, X, X, Kernel("matern12", 1.0))
    point = GaussianPrior([1.0], [[0.0]])
    mean, cov = embedding_init(model, point, 10, rng)
    np.testing.assert_allclose(mean, model.embed([1.0]), rtol=1e-14)
    assert np.abs(cov).max() < 1e-14
    # two draws: the mean is their average
    def two(rng, size):
        return np.array([[0.0, 3.0]])
    mean, cov = embedding_init(model, two, 2, rng)
    np.testing.assert_allclose(mean, 0.5 * (model.embed([0.0]) + model.embed([3.0])))
    with pytest.raises(ValueError):
        embedding_init(model, point, 1, rng)
