"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .tensor import Tensor, backward, no_grad


def finite_diff_check(f: Callable[[list[Tensor]], Tensor],
                      points: Sequence[np.ndarray],
                      step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps a list of parameter tensors to a scalar tensor; ``points`` are
    the parameter values to check at. The relative error per coordinate is
    |analytic - central| / max(1, |analytic|, |central|). Raises DomainError
    if any evaluation is non-finite (never silently swallowed).
    """
    if step <= 0:
        raise DomainError("step must be positive")
    base = [np.asarray(p, dtype=np.float64) for p in points]
    params = [Tensor(p.copy(), requires_grad=True) for p in base]
    loss = f(params)
    if loss.data.size != 1:
        raise DomainError("f must return a scalar")
    if not np.isfinite(loss.data).all():
        raise DomainError("non-finite loss at the evaluation point")
    analytic = backward(loss, params)

    def eval_at(values) -> float:
        with no_grad():
            out = f([Tensor(v) for v in values])
        val = float(out.data.reshape(()))
        if not np.isfinite(val):
            raise DomainError("non-finite evaluation during finite differencing")
        return val

    worst = 0.0
    for pi in range(len(base)):
        flat = base[pi].reshape(-1)
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + step
            f_plus = eval_at(base)
            flat[ci] = orig - step
            f_minus = eval_at(base)
            flat[ci] = orig
            central = (f_plus - f_minus) / (2.0 * step)
            a = float(analytic[pi].reshape(-1)[ci])
            err = abs(a - central) / max(1.0, abs(a), abs(central))
            if err > worst:
                worst = err
    return worst
