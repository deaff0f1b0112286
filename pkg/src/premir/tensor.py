"""Numeric kernel: activations, MSE loss, dropout, Adam and a gradient checker.

All arrays are float64 numpy arrays. Functions raise
:class:`~premir.errors.InvariantError` rather than return NaN/Inf.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import InvariantError, ValidationError

HARD_SIGMOID_SLOPE = 0.2
HARD_SIGMOID_EDGE = 2.5  # |x| beyond which hard_sigmoid saturates


def check_finite(x, what="value"):
    if not np.all(np.isfinite(x)):
        raise InvariantError(f"non-finite {what} encountered")
    return x


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    check_finite(x, "sigmoid input")
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def tanh(x):
    x = np.asarray(x, dtype=np.float64)
    check_finite(x, "tanh input")
    return np.tanh(x)


def tanh_grad(x):
    t = tanh(x)
    return 1.0 - t * t


def hard_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    check_finite(x, "hard_sigmoid input")
    return np.clip(HARD_SIGMOID_SLOPE * x + 0.5, 0.0, 1.0)


def hard_sigmoid_grad(x):
    x = np.asarray(x, dtype=np.float64)
    inside = (x > -HARD_SIGMOID_EDGE) & (x < HARD_SIGMOID_EDGE)
    return np.where(inside, HARD_SIGMOID_SLOPE, 0.0)


def mse_loss(pred, target):
    """Return ``(loss, dloss/dpred)`` with loss = sum of squared errors / m.

    ``m`` is the number of rows (samples); the sum runs over every entry.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValidationError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    m = pred.shape[0] if pred.ndim else 1
    diff = pred - target
    loss = float(np.sum(diff * diff) / m)
    check_finite(loss, "loss")
    return loss, (2.0 / m) * diff


def dropout_mask(shape, rate: float, gen: np.random.Generator | None, training: bool = True):
    """Inverted-dropout mask: 0 with probability ``rate``, else ``1/(1-rate)``.

    Outside training (or with ``rate == 0``) the mask is all ones, so applying
    it is the identity.
    """
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return np.ones(shape)
    keep = gen.random(shape) >= rate
    return keep / (1.0 - rate)


@dataclass
class AdamState:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError("Adam betas must lie in [0, 1)")


def adam_step(params: dict, grads: Mapping, state: AdamState) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if set(grads) != set(params):
        raise ValidationError("gradient keys do not match parameter keys")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        if g.shape != p.shape:
            raise ValidationError(f"{k}: gradient shape {g.shape} != parameter shape {p.shape}")
        check_finite(g, f"gradient {k}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m = state.m[k]
        v = state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.alpha * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise ``|a - n| / max(|a| + |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)


def numeric_grad(f: Callable[[], float], arr: np.ndarray, idx, h: float = 1e-5) -> float:
    old = arr[idx]
    arr[idx] = old + h
    fp = f()
    arr[idx] = old - h
    fm = f()
    arr[idx] = old
    return (fp - fm) / (2.0 * h)


def grad_check(
    f: Callable[[], float],
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    h: float = 1e-5,
    max_coords: int | None = None,
    gen: np.random.Generator | None = None,
    floor: float = 1e-6,
    skip: Callable[[str, tuple], bool] | None = None,
) -> float:
    """Max relative error between ``grads`` and central differences of ``f``.

    ``f`` is re-evaluated after perturbing ``params`` in place, so it must
    close over them. Arrays bigger than ``max_coords`` are subsampled with
    ``gen``. ``skip(name, idx)`` may exclude coordinates (e.g. near kinks).
    """
    worst = 0.0
    for name, arr in params.items():
        idxs = list(np.ndindex(arr.shape))
        if max_coords is not None and len(idxs) > max_coords:
            gen = gen or np.random.default_rng(0)
            pick = gen.choice(len(idxs), size=max_coords, replace=False)
            idxs = [idxs[i] for i in sorted(pick)]
        for idx in idxs:
            if skip is not None and skip(name, idx):
                continue
            num = numeric_grad(f, arr, idx, h)
            err = float(relative_error(grads[name][idx], num, floor))
            worst = max(worst, err)
    return worst
