import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spreaddiv.autodiff import Tensor, backward, grad_of, inv, logdet
from spreaddiv.errors import ConvergenceError, ValidationError
from spreaddiv.numerics import (eigh_sym, gaussian_kl, gaussian_logpdf_dense,
                                gaussian_logpdf_diag, logsumexp, make_rng)

from conftest import fd_grad, rel_err


# -- eigensolver --------------------------------------------------------------

def test_eigh_diagonal():
    w, V = eigh_sym(np.diag([4.0, 1.0]))
    assert np.allclose(w, [4.0, 1.0])
    assert np.allclose(np.abs(V[:, 0]), [1.0, 0.0])


def test_eigh_identity():
    w, _ = eigh_sym(np.eye(3))
    assert np.allclose(w, 1.0)


def test_eigh_reconstruction(rng):
    a = rng.standard_normal((5, 5))
    m = a + a.T
    w, V = eigh_sym(m)
    assert np.max(np.abs(V @ np.diag(w) @ V.T - m)) < 1e-8
    assert np.all(np.diff(w) <= 1e-12)


def test_eigh_rejects_asymmetric():
    with pytest.raises(ValidationError):
        eigh_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eigh_iteration_cap():
    a = np.random.default_rng(1).standard_normal((6, 6))
    with pytest.raises(ConvergenceError):
        eigh_sym(a + a.T, max_sweeps=1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**31 - 1))
def test_eigh_matches_lapack(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    m = a @ a.T
    w, V = eigh_sym(m)
    assert np.allclose(np.sort(w), np.linalg.eigvalsh(m), atol=1e-9)
    assert np.allclose(V.T @ V, np.eye(n), atol=1e-9)


# -- densities ----------------------------------------------------------------

def test_logpdf_standard_normal_mode():
    v = gaussian_logpdf_diag(np.zeros(1), np.zeros(1), np.ones(1))
    assert v == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)
    assert v == pytest.approx(-0.918939, abs=1e-6)


def test_logpdf_unit_displacement():
    v = gaussian_logpdf_diag(np.ones(1), np.zeros(1), np.ones(1))
    assert v == pytest.approx(-0.5 - 0.5 * math.log(2 * math.pi), abs=1e-15)


def test_logpdf_diag_high_precision(rng):
    x, mu = rng.standard_normal(4), rng.standard_normal(4)
    var = rng.uniform(0.1, 3.0, 4)
    mpmath.mp.dps = 50
    ref = mpmath.mpf(0)
    for xi, mi, vi in zip(x, mu, var):
        xi, mi, vi = mpmath.mpf(xi), mpmath.mpf(mi), mpmath.mpf(vi)
        ref += -(xi - mi) ** 2 / (2 * vi) - mpmath.log(2 * mpmath.pi * vi) / 2
    assert gaussian_logpdf_diag(x, mu, var) == pytest.approx(float(ref), abs=1e-13)


def test_logpdf_rejects_nonpositive_variance():
    with pytest.raises(ValidationError):
        gaussian_logpdf_diag(np.zeros(2), np.zeros(2), np.array([1.0, 0.0]))


def test_dense_matches_diag(rng):
    x, mu = rng.standard_normal(3), rng.standard_normal(3)
    var = rng.uniform(0.5, 2.0, 3)
    assert gaussian_logpdf_dense(x, mu, np.diag(var)) == pytest.approx(
        gaussian_logpdf_diag(x, mu, var), abs=1e-12)


def test_gaussian_kl_scalar():
    # KL(N(0,1) || N(1,2)) = 0.5 (1/2 + 1/2 - 1 + ln 2)
    assert gaussian_kl(np.zeros(1), np.eye(1), np.ones(1), 2 * np.eye(1)) == pytest.approx(
        0.5 * math.log(2.0), abs=1e-12)


def test_logsumexp_large_values():
    assert logsumexp(np.array([1000.0, 1000.0])) == pytest.approx(1000 + math.log(2))


def test_rng_determinism():
    assert np.array_equal(make_rng(7).standard_normal(5), make_rng(7).standard_normal(5))


# -- reverse-mode tape --------------------------------------------------------

def test_grad_square():
    x = Tensor(np.array(3.0), requires_grad=True)
    value, (g,) = grad_of(lambda: x * x, [x])
    assert value == 9.0 and g == pytest.approx(6.0)


def test_grad_constant_root():
    x = Tensor(np.ones(3), requires_grad=True)
    _, (g,) = grad_of(lambda: Tensor(np.array(2.0)) + x.sum() * 0.0, [x])
    assert np.all(g == 0.0)


def test_backward_non_scalar_root():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValidationError):
        backward(x * 2.0)


def test_mlp_gradient_matches_fd(rng):
    W1, b1 = rng.standard_normal((3, 5)), rng.standard_normal(5)
    W2, b2 = rng.standard_normal((5, 2)), rng.standard_normal(2)
    x = rng.standard_normal((4, 3))
    params = [Tensor(a.copy(), requires_grad=True) for a in (W1, b1, W2, b2)]

    def root():
        h = (Tensor(x) @ params[0] + params[1]).tanh()
        return (h @ params[2] + params[3]).tanh().sum()

    _, grads = grad_of(root, params)
    for p, g in zip(params, grads):
        num = fd_grad(lambda: root().item(), p.value)
        assert rel_err(g, num) < 1e-5


def test_inv_logdet_gradients(rng):
    a = rng.standard_normal((3, 3))
    M = Tensor(a @ a.T + 3 * np.eye(3), requires_grad=True)
    c = rng.standard_normal((3, 3))

    def root():
        return logdet(M) + (inv(M) * Tensor(c)).sum()

    _, (g,) = grad_of(root, [M])
    assert rel_err(g, fd_grad(lambda: root().item(), M.value)) < 1e-6


UNARY = ["tanh", "exp", "softplus", "square", "sqrt_abs", "neg"]


def _apply(op, t):
    if op == "sqrt_abs":
        return (t.square() + 1.0).sqrt()
    if op == "neg":
        return -t
    return getattr(t, op)()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(UNARY), min_size=1, max_size=4),
       st.sampled_from(["add", "mul", "matmul", "div"]),
       st.integers(0, 2**31 - 1))
def test_random_graph_gradients(ops, binop, seed):
    r = np.random.default_rng(seed)
    a = Tensor(r.uniform(-1, 1, (3, 3)), requires_grad=True)
    b = Tensor(r.uniform(-1, 1, (3, 3)), requires_grad=True)

    def root():
        h = a
        for op in ops:
            h = _apply(op, h) * 0.5
        if binop == "add":
            h = h + b
        elif binop == "mul":
            h = h * b
        elif binop == "matmul":
            h = h @ b
        else:
            h = h / (b.square() + 1.0)
        return h.logsumexp(axis=-1).mean()

    _, grads = grad_of(root, [a, b])
    for p, g in zip((a, b), grads):
        assert rel_err(g, fd_grad(lambda: root().item(), p.value), floor=1e-3) < 1e-5


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 50), st.integers(0, 2**31 - 1))
def test_eigh_reconstruction_up_to_50(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    m = a + a.T
    w, V = eigh_sym(m)
    assert np.linalg.norm(V @ np.diag(w) @ V.T - m) / np.linalg.norm(m) <= 1e-8
