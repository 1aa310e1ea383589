"""Two-dimensional toy with a degenerate second axis.

Data: z ~ Bernoulli(rate), x1 ~ N(z, std^2), x2 = 0 exactly.  The model
maps z in {0, 1} through a small network f to a mean (f1, f2) and per-axis
scales (f3, f4).  The latent is binary, so the likelihood is summed over
both values of z exactly.

modes
    ``plain``   x ~ N(f12(z), diag(f3^2, f4^2)); learning f4 -> 0 makes the
                likelihood unbounded.
    ``fixed``   x ~ N(f12(z), sigma_f^2 I); the variances are not learned.
    ``spread``  spread data y = x + sigma_f eps (fresh eps every step) fitted
                by N(f12(z), diag(f3^2 + sigma_f^2, f4^2 + sigma_f^2)), which
                stays bounded as f4 -> 0.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ..autodiff import Tensor, concat, grad_of
from ..errors import ValidationError
from ..numerics import LOG_2PI, make_rng
from .nets import Mlp
from .train import Adam, Sgd

MODES = ("plain", "fixed", "spread")
MODE_ALIASES = {"plain_learned_var": "plain", "fixed_var": "fixed"}
BLOWUP_LOGLIK = 1e3
# observation variance below this is numerically singular: a network output
# of order one cannot resolve a smaller scale, so the likelihood has
# stopped being able to grow only because of float precision
COLLAPSE_VARIANCE = 1e-10


@dataclass(frozen=True)
class Toy2dSpec:
    n: int = 2000
    rate: float = 0.5
    std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"toy dataset needs n >= 1, got {self.n}")
        if not 0.0 < self.rate < 1.0:
            raise ValidationError("Bernoulli rate must lie in (0, 1)")
        if not self.std > 0:
            raise ValidationError("component std must be positive")

    def generate(self):
        rng = make_rng(self.seed)
        z = (rng.random(self.n) < self.rate).astype(float)
        x1 = z + self.std * rng.standard_normal(self.n)
        return np.column_stack([x1, np.zeros(self.n)])


@dataclass
class Toy2dResult:
    means: np.ndarray            # (2, 2): rows are components, sorted by axis-1 mean
    variances: np.ndarray        # (2, 2): learned f3^2, f4^2 per component
    weights: np.ndarray          # mixture weights (fixed at the Bernoulli rate)
    loss_trace: list = field(default_factory=list)
    diverged: bool = False
    mode: str = "spread"
    reason: str = ""
    steps: int = 0

    def as_lines(self):
        lines = [f"mode={self.mode}", f"diverged={str(self.diverged).lower()}",
                 f"reason={self.reason or 'none'}", f"steps={self.steps}"]
        for k in range(2):
            lines.append(f"mean{k}_axis1={self.means[k, 0]:.17g}")
            lines.append(f"mean{k}_axis2={self.means[k, 1]:.17g}")
            lines.append(f"var{k}_axis1={self.variances[k, 0]:.17g}")
            lines.append(f"var{k}_axis2={self.variances[k, 1]:.17g}")
        if self.loss_trace:
            lines.append(f"final_loss={self.loss_trace[-1]:.17g}")
        return lines


def mixture_loglik(out, x, mode, sigma_f, rate=0.5):
    """Per-row log-likelihood (tape) of x under the 2-component model.

    ``out`` is the (2, 4) network output for z = 0 and z = 1.
    """
    x = Tensor(x)
    comps = []
    for k, w in ((0, 1.0 - rate), (1, rate)):
        mean = out[k, 0:2]
        if mode == "fixed":
            var = Tensor(np.full(2, sigma_f ** 2))
        else:
            var = out[k, 2:4].square()
            if mode == "spread":
                var = var + sigma_f ** 2
        r = x - mean
        ll = ((r.square() / var) + var.log() + LOG_2PI).sum(axis=-1) * -0.5 + math.log(w)
        comps.append(ll.reshape(-1, 1))
    return concat(comps, axis=1).logsumexp(axis=-1)


class _LineSearchAscent:
    """Gradient ascent with a backtracking (Armijo) step on a fixed objective.

    The trial step starts at twice the last accepted one, so the step size
    adapts to the local curvature in both directions.
    """

    def __init__(self, params, lr, max_lr=10.0, shrink=0.5, c=1e-4, min_lr=1e-14):
        self.params, self.lr = params, lr
        self.max_lr, self.shrink, self.c, self.min_lr = max_lr, shrink, c, min_lr

    def step(self, objective, value, grads):
        start = [p.value.copy() for p in self.params]
        gg = sum(float(np.sum(g * g)) for g in grads)
        t = min(2.0 * self.lr, self.max_lr)
        while t >= self.min_lr:
            for p, p0, g in zip(self.params, start, grads):
                p.value = p0 + t * g
            new = objective().item()
            if new == new and new >= value + self.c * t * gg:
                self.lr = t
                return new
            t *= self.shrink
        for p, p0 in zip(self.params, start):
            p.value = p0
        self.lr = self.min_lr
        return value


def observation_variances(out, mode, sigma_f):
    """Per-component axis variances of the model density, shape (2, 2)."""
    if mode == "fixed":
        return np.full((2, 2), sigma_f ** 2)
    var = out[:, 2:4] ** 2
    return var + sigma_f ** 2 if mode == "spread" else var


def toy2d_experiment(spec, mode="spread", sigma_f=0.3, steps=2000, lr=None,
                     hidden=16, optimizer="auto", seed=None, record_every=10,
                     decay_steps=500, init_scale=0.1):
    """Fit the toy model by (spread) maximum likelihood.

    Full-batch gradient ascent on the mean log-likelihood.  ``"sgd"`` and
    ``"adam"`` take steps of base size ``lr`` decayed as
    lr / (1 + t / decay_steps), so the fresh spread noise drawn every step
    averages out while the total step length still grows without bound.
    ``"linesearch"`` backtracks from a growing trial step; unlike a fixed
    step it can follow the plain-mode likelihood towards its singularity
    instead of stalling at a scale set by the step size.  ``"auto"`` uses
    the line search in plain mode and Adam otherwise.  ``lr=None`` picks
    0.01 for Adam and 0.05 for the others.

    The run is flagged as diverged, and stopped, when the mean per-sample
    log-likelihood exceeds ``BLOWUP_LOGLIK``, when a loss or parameter
    becomes non-finite, or when an observation variance of the model
    falls below ``COLLAPSE_VARIANCE``.
    """
    mode = MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not sigma_f > 0:
        raise ValidationError("sigma_f must be positive")
    if optimizer not in ("auto", "linesearch", "sgd", "adam"):
        raise ValidationError(f"unknown optimizer {optimizer!r}")
    if optimizer == "auto":
        optimizer = "linesearch" if mode == "plain" else "adam"
    if lr is None:
        lr = 0.01 if optimizer == "adam" else 0.05
    x = spec.generate()
    rng = make_rng(spec.seed + 1 if seed is None else seed)
    net = Mlp((1, hidden, 4), "tanh", rng)
    # start with scales small against the spread of the data, so neither
    # component can cover both clusters at once
    net.layers[-1][1].value[2:4] = init_scale
    zin = np.array([[0.0], [1.0]])
    params = net.params
    if optimizer == "linesearch":
        opt = _LineSearchAscent(params, lr)
    else:
        opt = Adam(params, lr) if optimizer == "adam" else Sgd(params, lr)
    trace, diverged, reason = [], False, ""
    with np.errstate(all="ignore"):
        for t in range(steps):
            data = x + sigma_f * rng.standard_normal(x.shape) if mode == "spread" else x

            def objective():
                return mixture_loglik(net(zin), data, mode, sigma_f, spec.rate).mean()

            value, grads = grad_of(objective, params)
            finite = math.isfinite(value) and all(np.all(np.isfinite(g)) for g in grads)
            if finite:
                if optimizer == "linesearch":
                    value = opt.step(objective, value, grads)
                    finite = math.isfinite(value)
                else:
                    opt.lr = lr / (1.0 + t / decay_steps)
                    opt.step(grads, ascend=True)
            params_finite = all(np.all(np.isfinite(p.value)) for p in params)
            if not (finite and params_finite):
                reason = "non-finite"
            elif value > BLOWUP_LOGLIK:
                reason = "loglik-threshold"
            elif np.min(observation_variances(net(zin).value, mode, sigma_f)) < COLLAPSE_VARIANCE:
                reason = "variance-collapse"
            if t % record_every == 0 or t == steps - 1 or reason:
                trace.append(-value)
            if reason:
                diverged = True
                break
        out = net(zin).value
    order = np.argsort(out[:, 0])
    means = out[order, 0:2]
    variances = out[order, 2:4] ** 2
    return Toy2dResult(means, variances, np.array([1.0 - spec.rate, spec.rate])[order],
                       trace, diverged, mode, reason, t + 1)
