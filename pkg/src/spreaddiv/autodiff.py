"""A small reverse-mode differentiation tape over numpy arrays.

Each :class:`Tensor` remembers the tensors it was computed from together with
a closure mapping the upstream gradient to the local contribution.  Calling
:func:`backward` on a scalar root walks the graph in reverse topological
order and accumulates ``.grad`` on every tensor created with
``requires_grad=True``.

Only the operations the spread bounds need are provided: affine maps,
elementwise nonlinearities, reductions, and the two small-matrix primitives
(``inv`` and ``logdet``) used by the Woodbury path.  Broadcasting follows
numpy; gradients are summed back to the operand shape.

A graph belongs to the thread that built it.
"""

import numpy as np

from .errors import ValidationError


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tensor:
    """A value on the tape.

    Parameters
    ----------
    value : array_like
        Stored as a float64 ndarray.
    requires_grad : bool
        Leaves with this flag receive gradients from :func:`backward`.
    """

    __array_priority__ = 100

    def __init__(self, value, requires_grad=False, _parents=()):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self._parents = _parents
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in _parents)

    def __repr__(self):
        return f"Tensor({self.value!r}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    def item(self):
        return float(self.value)

    def zero_grad(self):
        self.grad = None

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = _lift(other)
        a, b = self, other
        return Tensor(a.value + b.value, _parents=(
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(g, b.shape)),
        ))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.value, _parents=((self, lambda g: -g),))

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) + (-self)

    def __mul__(self, other):
        other = _lift(other)
        a, b = self, other
        return Tensor(a.value * b.value, _parents=(
            (a, lambda g: _unbroadcast(g * b.value, a.shape)),
            (b, lambda g: _unbroadcast(g * a.value, b.shape)),
        ))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        a, b = self, other
        return Tensor(a.value / b.value, _parents=(
            (a, lambda g: _unbroadcast(g / b.value, a.shape)),
            (b, lambda g: _unbroadcast(-g * a.value / b.value ** 2, b.shape)),
        ))

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __pow__(self, k):
        if isinstance(k, Tensor):
            raise ValidationError("only constant exponents are supported")
        a = self
        return Tensor(a.value ** k, _parents=(
            (a, lambda g: g * k * a.value ** (k - 1)),))

    def square(self):
        a = self
        return Tensor(a.value * a.value, _parents=((a, lambda g: 2.0 * g * a.value),))

    def __matmul__(self, other):
        other = _lift(other)
        a, b = self, other
        av, bv = a.value, b.value

        def grad_a(g):
            if bv.ndim == 1:
                return np.multiply.outer(g, bv) if av.ndim == 2 else g * bv
            if av.ndim == 1:
                return bv @ g
            return _unbroadcast(g @ np.swapaxes(bv, -1, -2), av.shape)

        def grad_b(g):
            if av.ndim == 1:
                return np.multiply.outer(av, g) if bv.ndim == 2 else g * av
            if bv.ndim == 1:
                return np.swapaxes(av, -1, -2) @ g if av.ndim == 2 else \
                    np.einsum("...ij,...i->j", av, g)
            return _unbroadcast(np.swapaxes(av, -1, -2) @ g, bv.shape)

        return Tensor(av @ bv, _parents=((a, grad_a), (b, grad_b)))

    def __rmatmul__(self, other):
        return _lift(other) @ self

    # -- shape ---------------------------------------------------------------
    @property
    def T(self):
        a = self
        return Tensor(a.value.T, _parents=((a, lambda g: g.T),))

    def reshape(self, *shape):
        a = self
        return Tensor(a.value.reshape(*shape), _parents=(
            (a, lambda g: g.reshape(a.shape)),))

    def __getitem__(self, idx):
        a = self

        def grad(g):
            out = np.zeros_like(a.value)
            np.add.at(out, idx, g)
            return out

        return Tensor(a.value[idx], _parents=((a, grad),))

    # -- reductions ---------------------------------------------------------
    def sum(self, axis=None):
        a = self

        def grad(g):
            if axis is None:
                return np.broadcast_to(g, a.shape).copy()
            return np.broadcast_to(np.expand_dims(g, axis), a.shape).copy()

        return Tensor(a.value.sum(axis=axis), _parents=((a, grad),))

    def mean(self, axis=None):
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) / float(n)

    # -- elementwise --------------------------------------------------------
    def tanh(self):
        out = np.tanh(self.value)
        return Tensor(out, _parents=((self, lambda g: g * (1.0 - out * out)),))

    def relu(self):
        mask = self.value > 0
        return Tensor(self.value * mask, _parents=((self, lambda g: g * mask),))

    def exp(self):
        out = np.exp(self.value)
        return Tensor(out, _parents=((self, lambda g: g * out),))

    def log(self):
        a = self
        return Tensor(np.log(a.value), _parents=((a, lambda g: g / a.value),))

    def softplus(self):
        v = self.value
        out = np.logaddexp(0.0, v)
        sig = 0.5 * (1.0 + np.tanh(0.5 * v))
        return Tensor(out, _parents=((self, lambda g: g * sig),))

    def abs(self):
        sgn = np.sign(self.value)
        return Tensor(np.abs(self.value), _parents=((self, lambda g: g * sgn),))

    def sqrt(self):
        out = np.sqrt(self.value)
        return Tensor(out, _parents=((self, lambda g: 0.5 * g / out),))

    def logsumexp(self, axis=-1):
        v = self.value
        m = np.max(v, axis=axis, keepdims=True)
        e = np.exp(v - m)
        s = e.sum(axis=axis, keepdims=True)
        out = np.squeeze(np.log(s) + m, axis=axis)
        soft = e / s
        return Tensor(out, _parents=((self, lambda g: np.expand_dims(g, axis) * soft),))


def tensor(value, requires_grad=False):
    return Tensor(value, requires_grad=requires_grad)


def inv(a):
    """Inverse of a small square matrix."""
    a = _lift(a)
    ainv = np.linalg.inv(a.value)
    return Tensor(ainv, _parents=((a, lambda g: -ainv.T @ g @ ainv.T),))


def logdet(a):
    """log|det a| for a square matrix (positive-definite in practice)."""
    a = _lift(a)
    _, ld = np.linalg.slogdet(a.value)
    ainv_t = np.linalg.inv(a.value).T
    return Tensor(ld, _parents=((a, lambda g: g * ainv_t),))


def stack(tensors, axis=0):
    ts = [_lift(t) for t in tensors]
    out = np.stack([t.value for t in ts], axis=axis)

    def make(i):
        return lambda g: np.take(g, i, axis=axis)

    return Tensor(out, _parents=tuple((t, make(i)) for i, t in enumerate(ts)))


def concat(tensors, axis=0):
    ts = [_lift(t) for t in tensors]
    out = np.concatenate([t.value for t in ts], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def make(lo, hi):
        def grad(g):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            return g[tuple(sl)]
        return grad

    return Tensor(out, _parents=tuple(
        (t, make(bounds[i], bounds[i + 1])) for i, t in enumerate(ts)))


def backward(root):
    """Accumulate d(root)/d(leaf) into ``.grad`` of every leaf needing it.

    Raises
    ------
    ValidationError
        If ``root`` is not a scalar.
    """
    if root.size != 1:
        raise ValidationError(f"backward needs a scalar root, got shape {root.shape}")
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for parent, _ in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack_.append((parent, False))
    grads = {id(root): np.ones_like(root.value)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if not node._parents:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, fn in node._parents:
            if not parent.requires_grad:
                continue
            contrib = np.asarray(fn(g), dtype=float).reshape(parent.shape)
            key = id(parent)
            grads[key] = grads[key] + contrib if key in grads else contrib


def grad_of(fn, params):
    """Evaluate ``fn()`` and return (value, [d value / d p for p in params])."""
    for p in params:
        p.zero_grad()
    out = fn()
    backward(out)
    return out.item(), [np.zeros_like(p.value) if p.grad is None else p.grad.copy()
                        for p in params]
