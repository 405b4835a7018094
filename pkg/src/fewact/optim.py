"""Adam with a multi-step learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .tensor import Tensor


@dataclass
class AdamState:
    """Optimizer state; one instance drives one ordered parameter list.

    ``milestones`` is a sequence of (step, multiplier) pairs; the effective
    learning rate for step k (1-based) is ``lr`` times the product of the
    multipliers of every milestone with step < k.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    milestones: tuple = ()
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def effective_lr(self) -> float:
        """Learning rate that the next step will use."""
        rate = self.lr
        for step, mult in self.milestones:
            if step <= self.step_count:
                rate *= mult
        return rate


def adam_step(state: AdamState, params: Sequence[Tensor],
              grads: Sequence[np.ndarray]) -> None:
    """One bias-corrected Adam update, in place on ``params``.

    Parameter order must be stable across calls; moments are kept per
    position and must match the parameter shapes.
    """
    if len(params) != len(grads):
        raise ShapeError("params/grads length mismatch")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ShapeError("optimizer state sized for a different parameter list")
    lr = state.effective_lr()
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=p.data.dtype)
        if g.shape != p.data.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.data.shape}")
        if state.m[i].shape != p.data.shape:
            raise ShapeError("moment shape != param shape")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def default_milestones(total_steps: int, mult: float = 0.1) -> tuple:
    """Decay at 50% and 75% of the run."""
    if total_steps <= 0:
        return ()
    return ((total_steps // 2, mult), ((3 * total_steps) // 4, mult))
