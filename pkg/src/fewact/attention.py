"""Scaled dot-product attention with learned projections.

One kernel serves both self-attention (q, k, v from one source) and
cross-attention. Residual connections are the caller's responsibility.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DomainError, ShapeError
from .tensor import Tensor, concat, softmax_last_axis, uniform_param


@dataclass
class AttentionParams:
    """Q/K/V/output projection weights and biases for one attention block."""

    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    heads: int = 1

    def tensors(self) -> list[tuple[str, Tensor]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)
                if f.name != "heads"]


def init_attention_params(rng: np.random.Generator, d_model: int,
                          heads: int = 1) -> AttentionParams:
    if heads < 1 or d_model % heads != 0:
        raise ShapeError(f"d_model={d_model} not divisible into {heads} heads")
    mats = {}
    for name in ("wq", "wk", "wv", "wo"):
        mats[name] = uniform_param(rng, (d_model, d_model), fan_in=d_model)
        mats["b" + name[1]] = uniform_param(rng, (d_model,), fan_in=d_model)
    return AttentionParams(heads=heads, **mats)


def identity_attention_params(d_model: int, heads: int = 1) -> AttentionParams:
    """Identity projections with zero bias (not trainable); test/bypass helper."""
    eye = lambda: Tensor(np.eye(d_model))
    zero = lambda: Tensor(np.zeros(d_model))
    return AttentionParams(wq=eye(), bq=zero(), wk=eye(), bk=zero(),
                           wv=eye(), bv=zero(), wo=eye(), bo=zero(), heads=heads)


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor,
                         params: AttentionParams) -> Tensor:
    """softmax(Q'K'^T / sqrt(d_head)) V' per head, then output-projected.

    ``q`` is (..., n_q, d_model); ``k`` and ``v`` are (..., n_k, d_model) with
    matching leading batch dims. Returns (..., n_q, d_model).
    """
    if q.shape[-1] != params.wq.shape[0]:
        raise ShapeError(f"query dim {q.shape[-1]} != d_model {params.wq.shape[0]}")
    if k.shape[-2] == 0:
        raise DomainError("attention over zero keys")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError("key/value counts differ")
    qp = q @ params.wq + params.bq
    kp = k @ params.wk + params.bk
    vp = v @ params.wv + params.bv
    d_model = qp.shape[-1]
    d_head = d_model // params.heads
    scale = 1.0 / np.sqrt(float(d_head))
    outs = []
    for h in range(params.heads):
        sl = slice(h * d_head, (h + 1) * d_head)
        qh, kh, vh = qp[..., sl], kp[..., sl], vp[..., sl]
        scores = (qh @ kh.transpose(*range(kh.ndim - 2), kh.ndim - 1, kh.ndim - 2)) * scale
        outs.append(softmax_last_axis(scores) @ vh)
    merged = outs[0] if len(outs) == 1 else concat(outs, axis=-1)
    return merged @ params.wo + params.bo
