"""Losses, metrics, optimisers, schedules and the basis-recovery experiment."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import GTParams, NLP_TRANSFORMS, VISION_TRANSFORMS, blend_kernel, gt_forward_1d, gt_grad_params
from .errors import ConfigError, EmptyBatch, EmptyHistory, LabelOutOfRange, ShapeMismatch
from .kernels import TransformKind, build_kernel

# -- loss and metrics ----------------------------------------------------------


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    y = np.atleast_1d(np.asarray(labels))
    b, m = z.shape
    if y.shape != (b,):
        raise ShapeMismatch(f"{b} logit rows but {y.shape} labels")
    if b == 0:
        raise EmptyBatch("cross entropy of an empty batch")
    if y.min() < 0 or y.max() >= m:
        raise LabelOutOfRange(f"labels must lie in [0, {m})")
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(lse - shifted[np.arange(b), y]))
    grad = softmax(z)
    grad[np.arange(b), y] -= 1.0
    return loss, grad / b


def top1_accuracy(logits, labels) -> float:
    z = np.atleast_2d(np.asarray(logits))
    y = np.atleast_1d(np.asarray(labels))
    if z.shape[0] == 0:
        raise EmptyBatch("accuracy of an empty batch")
    # np.argmax returns the first maximum, so ties go to the lowest class
    return 100.0 * float(np.mean(np.argmax(z, axis=1) == y))


# -- optimisers ----------------------------------------------------------------


@dataclass(frozen=True)
class SGD:
    momentum: float = 0.9
    weight_decay: float = 1e-4

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")


@dataclass(frozen=True)
class AdamW:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-6
    weight_decay: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ConfigError("betas must lie in (0, 1)")


def _as_dict(x):
    return (x, False) if isinstance(x, dict) else ({"_": x}, True)


def _check(params, grads):
    if params.keys() != grads.keys():
        raise ShapeMismatch("parameter and gradient names differ")
    for k in params:
        if np.shape(params[k]) != np.shape(grads[k]):
            raise ShapeMismatch(f"{k}: parameter {np.shape(params[k])} vs gradient {np.shape(grads[k])}")


def sgd_step(params, grads, state, config: SGD, lr: float, no_decay=(), lr_scale=None):
    """``v <- mu v + g``; ``theta <- theta - lr (v + wd theta)``.

    ``params``/``grads`` are arrays or dicts of arrays. Returns the new
    parameters and state; inputs are not modified.
    """
    params, single = _as_dict(params)
    grads, _ = _as_dict(grads)
    _check(params, grads)
    state = dict(state or {})
    out = {}
    for k, theta in params.items():
        v = config.momentum * state.get(k, 0.0) + grads[k]
        wd = 0.0 if k in no_decay else config.weight_decay
        step = lr * (lr_scale or {}).get(k, 1.0)
        out[k] = theta - step * (v + wd * theta)
        state[k] = v
    return (out["_"] if single else out), state


def adamw_step(params, grads, state, config: AdamW, lr: float, no_decay=(), lr_scale=None):
    """Bias-corrected Adam moments with decoupled weight decay."""
    params, single = _as_dict(params)
    grads, _ = _as_dict(grads)
    _check(params, grads)
    state = dict(state or {})
    t = state.get("__t", 0) + 1
    state["__t"] = t
    out = {}
    for k, theta in params.items():
        g = grads[k]
        m = config.beta1 * state.get(("m", k), 0.0) + (1.0 - config.beta1) * g
        v = config.beta2 * state.get(("v", k), 0.0) + (1.0 - config.beta2) * g * g
        state[("m", k)], state[("v", k)] = m, v
        mhat = m / (1.0 - config.beta1**t)
        vhat = v / (1.0 - config.beta2**t)
        wd = 0.0 if k in no_decay else config.weight_decay
        step = lr * (lr_scale or {}).get(k, 1.0)
        out[k] = theta - step * mhat / (np.sqrt(vhat) + config.eps) - step * wd * theta
    return (out["_"] if single else out), state


def optimizer_step(optimizer, *args, **kwargs):
    if isinstance(optimizer, SGD):
        return sgd_step(*args, optimizer, **kwargs)
    return adamw_step(*args, optimizer, **kwargs)


# -- schedules -----------------------------------------------------------------


@dataclass(frozen=True)
class StepDecay:
    initial_lr: float = 0.1
    factor: float = 0.1
    every_epochs: float = 31

    def __post_init__(self):
        if self.initial_lr <= 0:
            raise ConfigError("learning rate must be positive")


@dataclass(frozen=True)
class WarmupLinearDecay:
    peak_lr: float = 1e-5
    warmup_epochs: float = 2
    end_epoch: float = 20

    def __post_init__(self):
        if self.peak_lr <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0 <= self.warmup_epochs < self.end_epoch:
            raise ConfigError("need 0 <= warmup_epochs < end_epoch")


def lr_at(schedule, epoch: float) -> float:
    """Learning rate at a (possibly fractional) epoch."""
    if isinstance(schedule, StepDecay):
        return schedule.initial_lr * schedule.factor ** math.floor(epoch / schedule.every_epochs)
    if epoch < schedule.warmup_epochs:
        return schedule.peak_lr * epoch / schedule.warmup_epochs
    span = schedule.end_epoch - schedule.warmup_epochs
    return schedule.peak_lr * max(0.0, (schedule.end_epoch - epoch) / span)


# -- training loop -------------------------------------------------------------


@dataclass
class TrainConfig:
    optimizer: object = field(default_factory=lambda: SGD(momentum=0.9, weight_decay=0.0))
    schedule: object = field(default_factory=lambda: StepDecay(0.05, 0.1, 1000))
    batch_size: int = 50
    epochs: int = 20
    seed: int = 7
    gt_lr_mult: float = 1.0
    decay_gt: bool = False

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_top1: float
    val_loss: float
    val_top1: float
    gt: tuple = ()


@dataclass
class RunHistory:
    records: list = field(default_factory=list)
    initial_gt: tuple = ()

    @property
    def gt_trajectory(self) -> list:
        return [r.gt for r in self.records]

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n_gt = len(self.records[0].gt) if self.records else len(self.initial_gt)
        head = ["epoch", "train_loss", "train_top1", "val_loss", "val_top1"]
        for g in range(n_gt):
            width = len(self.records[0].gt[g]) if self.records else len(self.initial_gt[g])
            suffix = "" if g == 0 else f"_{g}"
            head += [f"p{j + 1}{suffix}" for j in range(width)]
        w.writerow(head)
        for r in self.records:
            row = [r.epoch] + [repr(float(v)) for v in (r.train_loss, r.train_top1, r.val_loss, r.val_top1)]
            for vec in r.gt:
                row += [repr(float(v)) for v in vec]
            w.writerow(row)
        return buf.getvalue()


def select_best_epoch(history: RunHistory) -> int:
    if not history.records:
        raise EmptyHistory("no epochs recorded")
    vals = history.column("val_top1")
    return int(np.argmax(vals))


def train_loop(params: dict, loss_grad: Callable, evaluate: Callable, n_train: int,
               config: TrainConfig, gt_names: Sequence[str] = (), history: RunHistory | None = None):
    """Mini-batch training with a per-epoch evaluation callback.

    ``loss_grad(params, idx)`` returns ``(loss, grads)`` on the samples
    ``idx``; ``evaluate(params)`` returns ``(train_loss, train_top1,
    val_loss, val_top1)``. Batches are drawn from a seeded permutation.
    """
    rng = np.random.default_rng(config.seed)
    history = history if history is not None else RunHistory()
    history.initial_gt = tuple(tuple(params[k]) for k in gt_names)
    steps_per_epoch = max(1, math.ceil(n_train / config.batch_size))
    no_decay = () if config.decay_gt else tuple(gt_names)
    lr_scale = {k: config.gt_lr_mult for k in gt_names}
    state = None
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        for b in range(steps_per_epoch):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            _, grads = loss_grad(params, idx)
            lr = lr_at(config.schedule, step / steps_per_epoch)
            params, state = optimizer_step(config.optimizer, params, grads, state, lr=lr,
                                           no_decay=no_decay, lr_scale=lr_scale)
            step += 1
        tl, ta, vl, va = evaluate(params)
        history.records.append(EpochRecord(epoch, tl, ta, vl, va, tuple(tuple(params[k]) for k in gt_names)))
    return params, history


# -- basis recovery ------------------------------------------------------------


@dataclass
class BasisTask:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    transforms: tuple
    target: TransformKind
    probe: int


def transforms_for(target) -> tuple:
    target = TransformKind.parse(target)
    if target in VISION_TRANSFORMS:
        return VISION_TRANSFORMS
    if target in NLP_TRANSFORMS:
        return NLP_TRANSFORMS
    raise ConfigError(f"no transform list contains {target.value}")


def make_basis_task(target="dct2", n: int = 8, n_train: int = 2000, n_val: int = 500, probe: int = 1,
                    noise: float = 1.0, background: float = 1.0,
                    flip: float = 0.05, seed: int = 7, transforms=None) -> BasisTask:
    """Synthetic task whose label is the sign of one target-basis coefficient.

    Inputs are ``z_c u_c + background * (isotropic noise orthogonal to
    u_c) + noise * (distractors)``, where ``u_c`` is the unit-norm probe row of
    the target kernel and the distractors are the real and imaginary
    parts of the competing kernels' probe rows, projected orthogonal to
    ``u_c``. The exact target coefficient is therefore noise free while
    any admixture of a competing basis picks the distractors up.
    """
    target = TransformKind.parse(target)
    transforms = tuple(TransformKind.parse(t) for t in transforms) if transforms else transforms_for(target)
    if target not in transforms:
        raise ConfigError(f"target {target.value} is not in the transform list")
    if not 0 <= probe < n:
        raise ConfigError(f"probe index must lie in [0, {n})")
    rng = np.random.default_rng(seed)
    k_target = build_kernel(target, n).entries.real
    basis = k_target / np.linalg.norm(k_target, axis=1, keepdims=True)
    u = basis[probe]
    complement = np.eye(n) - np.outer(u, u)
    distractors = []
    for kind in transforms:
        if kind is target:
            continue
        row = build_kernel(kind, n).entries[probe]
        for part in (row.real, row.imag):
            d = part - (part @ u) * u
            if np.linalg.norm(d) > 1e-9:
                distractors.append(d / np.linalg.norm(d))
    distractors = np.array(distractors).reshape(-1, n)

    def sample(count):
        zc = rng.normal(size=count)
        x = zc[:, None] * u
        x += background * rng.normal(size=(count, n)) @ complement
        if len(distractors):
            x += noise * rng.normal(size=(count, len(distractors))) @ distractors
        coeff = x @ k_target[probe]
        y = (coeff > 0).astype(np.int64)
        flips = rng.random(count) < flip
        return x, np.where(flips, 1 - y, y)

    xt, yt = sample(n_train)
    xv, yv = sample(n_val)
    return BasisTask(xt, yt, xv, yv, transforms, target, probe)


def basis_train_config(seed: int = 7, epochs: int = 60, lr: float = 0.2, momentum: float = 0.5,
                       batch_size: int = 2000) -> TrainConfig:
    """Default protocol for the basis-recovery experiment: full-batch
    momentum descent at a constant rate."""
    return TrainConfig(optimizer=SGD(momentum=momentum, weight_decay=0.0),
                       schedule=StepDecay(lr, 1.0, max(epochs, 1)), batch_size=batch_size,
                       epochs=epochs, seed=seed)


def neutral_params(transforms) -> GTParams:
    m = len(transforms) - 1
    return GTParams(tuple(transforms), tuple([1.0 / (m + 1)] * m), 1.0)


def corner_params(transforms, target) -> GTParams:
    target = TransformKind.parse(target)
    transforms = tuple(TransformKind.parse(t) for t in transforms)
    m = len(transforms) - 1
    weights = [0.0] * m
    i = transforms.index(target)
    if i < m:
        weights[i] = 1.0
    return GTParams(transforms, tuple(weights), 1.0)


class ProbeModel:
    """General transform on a vector, one probed coefficient, affine head."""

    def __init__(self, template: GTParams, probe: int, num_classes: int = 2, train_gt: bool = True):
        self.template = template
        self.probe = probe
        self.num_classes = num_classes
        self.train_gt = train_gt

    def init(self, rng, gt: GTParams) -> dict:
        return {
            "gt": gt.as_vector(),
            "head.w": np.zeros((1, self.num_classes)),
            "head.b": np.zeros(self.num_classes),
        }

    def forward(self, params, x):
        gt = self.template.with_vector(params["gt"])
        out, y = gt_forward_1d(gt, x)
        f = out[:, self.probe:self.probe + 1]
        return f @ params["head.w"] + params["head.b"], (gt, x, y, f)

    def loss_grad(self, params, x, labels):
        logits, (gt, xs, y, f) = self.forward(params, x)
        loss, dl = cross_entropy(logits, labels)
        grads = {"head.w": f.T @ dl, "head.b": dl.sum(axis=0)}
        if self.train_gt:
            up = np.zeros_like(y.real)
            up[:, self.probe:self.probe + 1] = dl @ params["head.w"].T
            dp, dp3 = gt_grad_params(gt, xs, up, y, ndim=1)
            grads["gt"] = np.append(dp, dp3)
        else:
            grads["gt"] = np.zeros_like(params["gt"])
        return loss, grads

    def evaluate(self, params, x, labels):
        logits, _ = self.forward(params, x)
        return cross_entropy(logits, labels)[0], top1_accuracy(logits, labels)


def _fit_probe(task: BasisTask, config: TrainConfig, init: GTParams, train_gt: bool):
    model = ProbeModel(init, task.probe, train_gt=train_gt)
    params = model.init(np.random.default_rng(config.seed + 1), init)

    def loss_grad(p, idx):
        return model.loss_grad(p, task.x_train[idx], task.y_train[idx])

    def evaluate(p):
        return model.evaluate(p, task.x_train, task.y_train) + model.evaluate(p, task.x_val, task.y_val)

    names = ("gt",) if train_gt else ()
    return train_loop(params, loss_grad, evaluate, len(task.y_train), config, gt_names=names)


def run_basis_recovery_experiment(target="dct2", config: TrainConfig | None = None,
                                  task: BasisTask | None = None, init: GTParams | None = None,
                                  **task_kwargs) -> RunHistory:
    """Train the transform and a linear head from a neutral start."""
    config = config or basis_train_config()
    task = task or make_basis_task(target, seed=config.seed, **task_kwargs)
    init = init or neutral_params(task.transforms)
    _, history = _fit_probe(task, config, init, train_gt=True)
    return history


def run_basis_oracle(target="dct2", config: TrainConfig | None = None, task: BasisTask | None = None,
                     **task_kwargs) -> RunHistory:
    """Same head and protocol on the exact target-basis coefficients."""
    config = config or basis_train_config()
    task = task or make_basis_task(target, seed=config.seed, **task_kwargs)
    _, history = _fit_probe(task, config, corner_params(task.transforms, task.target), train_gt=False)
    return history
