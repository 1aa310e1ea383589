"""Alternating training of a delta-VAE and its spread noise.

Model steps ascend the bound in (theta, phi).  Spread steps ascend the
estimated spread divergence in psi (see
:func:`~spreaddiv.dvae.bounds.spread_objective`), so the noise seeks the
directions where model and data differ most.  Fresh noise is drawn for
every step.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ..autodiff import grad_of
from ..errors import TrainingDiverged, ValidationError
from ..numerics import make_rng
from .bounds import draw_noise, elbo, spread_objective
from .model import MeanTransformSpread

OPTIMIZERS = ("sgd", "adam")
SCHEDULE_UNITS = ("step", "epoch")


@dataclass
class TrainConfig:
    """Training settings.

    ``model_steps : spread_steps`` is the alternation pattern; within each
    cycle the spread steps run first.  ``schedule_unit="epoch"`` alternates
    whole epochs instead of single minibatch steps.  ``spread_steps=0``
    trains with the spread noise frozen.  ``variance_reduced`` selects the
    bound form (see :func:`~spreaddiv.dvae.bounds.elbo`).
    """

    lr_model: float = 0.01
    lr_spread: float = 0.001
    batch_size: int = 32
    epochs: int = 20
    model_steps: int = 1
    spread_steps: int = 0
    schedule_unit: str = "step"
    eps_samples: int = 1
    seed: int = 0
    optimizer: str = "sgd"
    variance_reduced: bool = False
    share_noise: bool = True

    def __post_init__(self):
        for name in ("batch_size", "epochs", "model_steps", "eps_samples"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be a positive count")
        if self.spread_steps < 0:
            raise ValidationError("spread_steps must be non-negative")
        if not (self.lr_model > 0 and self.lr_spread > 0):
            raise ValidationError("learning rates must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.schedule_unit not in SCHEDULE_UNITS:
            raise ValidationError(f"unknown schedule unit {self.schedule_unit!r}")

    @property
    def schedule(self):
        return f"{self.model_steps}:{self.spread_steps}"


def parse_schedule(text):
    """'M:S' -> (M, S)."""
    try:
        m, s = (int(v) for v in str(text).split(":"))
    except ValueError:
        raise ValidationError(f"schedule must look like 'M:S', got {text!r}") from None
    if m < 1 or s < 0:
        raise ValidationError(f"schedule needs M >= 1 and S >= 0, got {text!r}")
    return m, s


# Larger-scale schedules kept for reference; they run on the same small
# networks and data as everything else.
PRESETS = {
    # 10 model epochs per 2 covariance epochs, Adam
    "mnist-lowrank": dict(model_steps=10, spread_steps=2, schedule_unit="epoch",
                          optimizer="adam", lr_model=5e-4, lr_spread=5e-5, epochs=200),
    # one spread step per model step, Adam
    "celeba-meantransform": dict(model_steps=1, spread_steps=1, schedule_unit="step",
                                 optimizer="adam", lr_model=1e-4, lr_spread=1e-5),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return TrainConfig(**{**PRESETS[name], **overrides})


class Sgd:
    def __init__(self, params, lr):
        self.params, self.lr = params, lr

    def step(self, grads, ascend=False):
        sign = 1.0 if ascend else -1.0
        for p, g in zip(self.params, grads):
            p.value = p.value + sign * self.lr * g


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params, self.lr = params, lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0

    def step(self, grads, ascend=False):
        self.t += 1
        sign = 1.0 if ascend else -1.0
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value = p.value + sign * self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _optimizer(name, params, lr):
    return Adam(params, lr) if name == "adam" else Sgd(params, lr)


@dataclass
class TrainResult:
    model: object
    trace: list = field(default_factory=list)  # (epoch, mean negative bound)
    spectral_norms: list = field(default_factory=list)
    steps: int = 0


def _is_spread_step(cfg, step, epoch):
    cycle = cfg.model_steps + cfg.spread_steps
    pos = (epoch if cfg.schedule_unit == "epoch" else step) % cycle
    return pos < cfg.spread_steps


def train_dvae(data, model, cfg):
    """Train ``model`` on ``data`` (N, D) and return a :class:`TrainResult`.

    Raises
    ------
    TrainingDiverged
        When a loss or parameter becomes non-finite.  The exception carries
        the loss trace so far and the last finite flat parameter vector.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.x_dim or x.shape[0] == 0:
        raise ValidationError(f"data must have shape (N, {model.x_dim}) with N > 0")
    rng = make_rng(cfg.seed)
    learn_spread = cfg.spread_steps > 0 and bool(model.spread_params())
    model_params = model.model_params()
    spread_params = model.spread_params()
    opt_model = _optimizer(cfg.optimizer, model_params, cfg.lr_model)
    opt_spread = _optimizer(cfg.optimizer, spread_params, cfg.lr_spread) if learn_spread else None
    transform = isinstance(model.spread, MeanTransformSpread)
    result = TrainResult(model)
    last_good = model.get_flat()
    n = x.shape[0]
    step = 0
    # overflow is caught below and reported as TrainingDiverged
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            losses = []
            for lo in range(0, n, cfg.batch_size):
                batch = np.repeat(x[order[lo:lo + cfg.batch_size]], cfg.eps_samples, axis=0)
                noise = draw_noise(model, batch.shape[0], rng, cfg.share_noise)
                if learn_spread and _is_spread_step(cfg, step, epoch):
                    box = {}

                    def objective():
                        obj, bound = spread_objective(model, batch, noise=noise,
                                                      variance_reduced=cfg.variance_reduced,
                                                      share_noise=cfg.share_noise)
                        box["bound"] = bound.item()
                        return obj

                    value, grads = grad_of(objective, spread_params)
                    loss = -box["bound"]
                    opt_spread.step(grads, ascend=True)
                    if transform:
                        model.spread.renormalize()
                else:
                    loss, grads = grad_of(
                        lambda: elbo(model, batch, noise=noise, variance_reduced=cfg.variance_reduced,
                                     share_noise=cfg.share_noise) * -1.0,
                        model_params)
                    value = loss
                    opt_model.step(grads)
                step += 1
                flat = model.get_flat()
                if not (math.isfinite(value) and math.isfinite(loss) and np.all(np.isfinite(flat))):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}",
                                           result.trace, last_good)
                last_good = flat
                losses.append(loss)
                if transform:
                    result.spectral_norms.append(model.spread.max_spectral_norm())
            result.trace.append((epoch, float(np.mean(losses))))
    result.steps = step
    return result
