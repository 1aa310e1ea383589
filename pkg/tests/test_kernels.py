import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal
from hypothesis import given, settings, strategies as st

from spreaddiv.errors import ConvergenceError, ValidationError
from spreaddiv.kernels import (DiscreteSpread, LowRankGaussianNoise, MeanTransformNoise,
                               StationaryKernel, check_discrete_spread,
                               check_stationary_validity, kernel_mass_on_grid,
                               lowrank_logpdf, lowrank_sample, mean_transform_apply,
                               mean_transform_invert, spectral_norm, spectral_normalize,
                               spread_sample)
from spreaddiv.numerics import gaussian_logpdf_dense, gaussian_logpdf_diag


# -- stationary kernels -------------------------------------------------------

def test_gaussian_kernel_valid():
    omegas = np.linspace(0, 10, 11)
    rep = check_stationary_validity(StationaryKernel("gaussian", 1.0), omegas)
    assert rep.valid and rep.positive_density and rep.ft_condition == "nonvanishing"
    assert np.allclose(rep.transform, np.exp(-omegas ** 2 / 2))
    assert np.all(rep.transform > 0)


def test_gaussian_ft_at_zero():
    assert StationaryKernel("gaussian", 1.0).fourier(np.array([0.0]))[0] == pytest.approx(1.0)


def test_laplace_ft_at_one():
    rep = check_stationary_validity(StationaryKernel("laplace", 1.0), np.array([1.0]))
    assert rep.valid
    assert rep.transform[0] == pytest.approx(math.sqrt(2 / math.pi) / 2, abs=1e-15)


def test_kernel_rejects_nonpositive_scale():
    with pytest.raises(ValidationError):
        StationaryKernel("gaussian", 0.0)
    with pytest.raises(ValidationError):
        StationaryKernel("cauchy", 1.0)


@pytest.mark.parametrize("family", ["gaussian", "laplace"])
def test_kernel_density_normalized(family):
    assert kernel_mass_on_grid(StationaryKernel(family, 0.7)) == pytest.approx(1.0, abs=1e-6)


def test_report_lines():
    lines = check_stationary_validity(StationaryKernel("gaussian", 1.0), np.array([0.0])).as_lines()
    assert "valid=true" in lines


# -- discrete spread ----------------------------------------------------------

def test_discrete_flags_mixing():
    assert check_discrete_spread([[0.75, 0.25], [0.25, 0.75]]) == {
        "injective": True, "support_complete": True}


def test_discrete_flags_identity():
    assert check_discrete_spread(np.eye(2)) == {"injective": True, "support_complete": False}


def test_discrete_flags_equal_columns():
    P = np.array([[0.5, 0.5, 0.2], [0.5, 0.5, 0.3], [0.0, 0.0, 0.5]])
    assert not check_discrete_spread(P)["injective"]


def test_discrete_rejects_non_stochastic():
    with pytest.raises(ValidationError):
        DiscreteSpread(np.array([[0.5, 0.5], [0.6, 0.5]]))


# -- low-rank Gaussian --------------------------------------------------------

def test_lowrank_zero_U_is_diagonal(rng):
    y, x = rng.standard_normal(4), rng.standard_normal(4)
    noise = LowRankGaussianNoise(0.3, np.zeros((4, 2)))
    assert lowrank_logpdf(noise, y, x) == pytest.approx(
        gaussian_logpdf_diag(y, x, np.full(4, 0.3)), abs=1e-12)


def test_lowrank_matches_dense(rng):
    U = rng.standard_normal((3, 1))
    noise = LowRankGaussianNoise(0.2, U)
    y, x = rng.standard_normal(3), rng.standard_normal(3)
    dense = multivariate_normal(mean=x, cov=0.2 * np.eye(3) + U @ U.T).logpdf(y)
    assert abs(lowrank_logpdf(noise, y, x) - dense) < 1e-8


def test_lowrank_mode_value():
    noise = LowRankGaussianNoise(1.0, np.zeros((2, 1)))
    assert lowrank_logpdf(noise, np.zeros(2), np.zeros(2)) == pytest.approx(-math.log(2 * math.pi))


def test_lowrank_dimension_mismatch():
    noise = LowRankGaussianNoise(1.0, np.zeros((2, 1)))
    with pytest.raises(ValidationError):
        lowrank_logpdf(noise, np.zeros(3), np.zeros(3))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.integers(1, 5), st.floats(0.01, 10.0), st.integers(0, 2**31 - 1))
def test_lowrank_woodbury_property(D, R, sigma2, seed):
    r = np.random.default_rng(seed)
    R = min(R, D)
    U = r.standard_normal((D, R))
    y, x = r.standard_normal(D), r.standard_normal(D)
    noise = LowRankGaussianNoise(sigma2, U)
    dense = gaussian_logpdf_dense(y, x, noise.covariance())
    assert abs(lowrank_logpdf(noise, y, x) - dense) < 1e-8


def test_lowrank_sample_covariance():
    noise = LowRankGaussianNoise(0.01, np.array([[1.0], [0.0]]))
    s = noise.draw(100_000, 0)
    cov = np.cov(s.T, bias=True)
    target = np.array([[1.01, 0.0], [0.0, 0.01]])
    assert np.linalg.norm(cov - target) / np.linalg.norm(target) < 0.05


def test_lowrank_sample_concentrates():
    x = np.array([1.0, -2.0])
    for sigma2 in (1e-2, 1e-6):
        noise = LowRankGaussianNoise(sigma2, np.zeros((2, 1)))
        s = np.array([lowrank_sample(noise, x, seed) for seed in range(50)])
        assert np.max(np.abs(s - x)) < 6 * math.sqrt(sigma2)


def test_lowrank_sample_deterministic():
    noise = LowRankGaussianNoise(0.5, np.ones((3, 1)))
    assert np.array_equal(lowrank_sample(noise, np.zeros(3), 4), lowrank_sample(noise, np.zeros(3), 4))


# -- spectral normalisation and mean transforms -------------------------------

def test_spectral_normalize_diag():
    assert np.allclose(spectral_normalize(np.diag([2.0, 1.0]), 0.9), np.diag([0.9, 0.45]))


def test_spectral_normalize_identity():
    assert np.allclose(spectral_normalize(np.eye(3), 0.5), 0.5 * np.eye(3))


def test_spectral_normalize_zero():
    assert np.all(spectral_normalize(np.zeros((2, 2)), 0.9) == 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.05, 0.99), st.integers(0, 2**31 - 1))
def test_spectral_normalize_property(m, n, c, seed):
    w = np.random.default_rng(seed).standard_normal((m, n))
    out = spectral_normalize(w, c)
    top = math.sqrt(np.linalg.eigvalsh(out.T @ out)[-1])
    assert abs(top - c) < 1e-6
    assert abs(spectral_norm(w) - np.linalg.norm(w, 2)) < 1e-8


def test_mean_transform_zero_is_identity(rng):
    noise = MeanTransformNoise.identity(3, StationaryKernel("gaussian", 1.0))
    x = rng.standard_normal(3)
    assert np.array_equal(mean_transform_apply(noise, x), x)
    assert np.allclose(mean_transform_invert(noise, x), x)


def test_mean_transform_half_tanh_origin():
    base = StationaryKernel("gaussian", 1.0)
    noise = MeanTransformNoise(base, np.array([[1.0]]), np.zeros(1), np.array([[0.5]]), np.zeros(1))
    assert mean_transform_apply(noise, np.zeros(1))[0] == 0.0
    assert mean_transform_invert(noise, np.zeros(1))[0] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_mean_transform_round_trip(seed):
    noise = MeanTransformNoise.init(8, 8, StationaryKernel("gaussian", 1.0), rng=seed)
    x = np.random.default_rng(seed).standard_normal(8) * 3
    assert np.max(np.abs(mean_transform_invert(noise, mean_transform_apply(noise, x)) - x)) <= 1e-6


def test_mean_transform_invert_cap():
    # Lipschitz constant 3 breaks the contraction
    base = StationaryKernel("gaussian", 1.0)
    noise = MeanTransformNoise(base, np.array([[1.0]]), np.zeros(1), np.array([[3.0]]),
                               np.zeros(1), c=0.9)
    with pytest.raises(ConvergenceError):
        mean_transform_invert(noise, np.array([2.0]))


# -- sampling -----------------------------------------------------------------

def test_laplace_sample_median():
    k = StationaryKernel("laplace", 1.0)
    s = np.array(k.draw((100_000,), 0))
    assert abs(np.median(s)) < 0.02


def test_mean_transform_zero_matches_stationary():
    base = StationaryKernel("gaussian", 1.0)
    mt = MeanTransformNoise.identity(1, base)
    x = np.array([0.5])
    r1, r2 = np.random.default_rng(1), np.random.default_rng(2)
    a = np.array([spread_sample(mt, x, r1)[0] for _ in range(4000)])
    b = np.array([spread_sample(base, x, r2)[0] for _ in range(4000)])
    se = math.sqrt(a.var() / a.size + b.var() / b.size)
    assert abs(a.mean() - b.mean()) < 3 * se
    assert abs(a.var() - b.var()) < 3 * math.sqrt(2 / a.size) * 2


def test_spread_sample_families(rng):
    x = np.zeros(2)
    for noise in (StationaryKernel("gaussian", 0.5), StationaryKernel("laplace", 0.5),
                  LowRankGaussianNoise(0.5, np.ones((2, 1)))):
        y = spread_sample(noise, x, rng)
        assert y.shape == (2,) and np.all(np.isfinite(y))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_woodbury_inverse_and_logdet(D, R, seed):
    r = np.random.default_rng(seed)
    noise = LowRankGaussianNoise(float(r.uniform(0.05, 5)), r.standard_normal((D, min(R, D))))
    dense = noise.covariance()
    inv = np.linalg.inv(dense)
    assert np.linalg.norm(noise.precision() - inv) / np.linalg.norm(inv) <= 1e-8
    chol = 2 * np.sum(np.log(np.diag(np.linalg.cholesky(dense))))
    assert abs(noise.logdet() - chol) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.floats(0.1, 0.99), st.integers(0, 2**31 - 1))
def test_spectral_normalize_idempotent(n, c, seed):
    w = spectral_normalize(np.random.default_rng(seed).standard_normal((n, n)), c)
    assert np.max(np.abs(spectral_normalize(w, c) - w)) <= 1e-6


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 8), st.floats(0.1, 0.97), st.integers(0, 2**31 - 1))
def test_injectivity_round_trip_100_inputs(dim, c, seed):
    noise = MeanTransformNoise.init(dim, dim, StationaryKernel("gaussian", 1.0), c=c, rng=seed)
    xs = np.random.default_rng(seed).standard_normal((100, dim)) * 3
    for x in xs:
        assert np.max(np.abs(noise.invert(noise.apply(x)) - x)) <= 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_discrete_injectivity_sound(n, seed):
    r = np.random.default_rng(seed)
    P = r.random((n, n)) * (r.random((n, n)) > 0.4)
    P[0, :] += 1e-9
    P /= P.sum(axis=0)
    if not check_discrete_spread(P)["injective"]:
        return
    for _ in range(10):
        p, q = r.dirichlet(np.ones(n)), r.dirichlet(np.ones(n))
        assert np.max(np.abs(P @ p - P @ q)) > 0
