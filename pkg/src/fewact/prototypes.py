"""Query-guided class prototype construction.

Per class and branch, the shot-mean prototype is refined by a token-level
(local) and a video-level (global) weighted sum over the whole query batch
(transductive), then mixed:

    refined = (P + alpha * P_local + (1 - alpha) * P_global) / 2

``alpha`` is either fixed, learnable (clamped to [0, 1] after each optimizer
step), or selected per episode by a deterministic two-value gate driven by
branch-wise bidirectional mean-min token distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .tensor import Tensor, softmax_last_axis, where

ZERO_NORM_EPS = 1e-12

ALPHA_MODES = ("fixed", "learnable", "adaptive")
ADAPTIVE_ALPHA_LOW = 0.1
ADAPTIVE_ALPHA_HIGH = 0.9


@dataclass
class AlphaPolicy:
    """How the local/global mixing coefficient is chosen."""

    mode: str = "fixed"        # fixed | learnable | adaptive
    value: float = 0.1         # fixed value, or initialization when learnable

    def check(self) -> None:
        if self.mode not in ALPHA_MODES:
            raise DomainError(f"unknown alpha mode {self.mode!r}")
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"alpha must be in [0, 1], got {self.value}")


@dataclass
class AlphaGate:
    """Adaptive gate decision for one episode."""

    alpha: float
    d_visual: float | None
    d_textual: float | None
    fallback: str | None = None


def init_prototype(shots: Tensor) -> Tensor:
    """Element-wise mean of (K x L x D') support features over the shot axis."""
    if shots.ndim != 3:
        raise ShapeError("support features must be (shots, tokens, width)")
    if shots.shape[0] == 0:
        raise DomainError("prototype over zero shots")
    return shots.mean(axis=0)


def pad_textual(a: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    """Zero-pad the shorter token matrix at the tail to the common length."""
    return pad_rows(a, max(a.shape[0], b.shape[0])), \
        pad_rows(b, max(a.shape[0], b.shape[0]))


def pad_rows(x: Tensor, rows: int) -> Tensor:
    if x.shape[0] == rows:
        return x
    if x.shape[0] > rows:
        raise ShapeError(f"cannot pad {x.shape[0]} rows down to {rows}")
    from .tensor import concat
    filler = Tensor(np.zeros((rows - x.shape[0],) + tuple(x.shape[1:]),
                             dtype=x.data.dtype))
    return concat([x, filler], axis=0)


def _guarded_cosine(dots: Tensor, norm_a: Tensor, norm_b: Tensor) -> Tensor:
    """cosine = dots / (|a||b|), defined as 0 when either norm ~ 0 so padded
    zero rows cannot attract similarity mass."""
    denom = norm_a * norm_b
    ok = denom.data > ZERO_NORM_EPS
    safe = where(ok, denom, Tensor(np.ones_like(denom.data)))
    return where(ok, dots / safe, Tensor(np.zeros_like(dots.data)))


def local_prototype(p: Tensor, f_q: Tensor) -> tuple[Tensor, Tensor]:
    """Token-position-wise refinement: (P_loc, A_loc).

    ``p`` is (L x D'), ``f_q`` is (B x L x D'). For each token position the
    query tokens at that position are combined with softmax weights over the
    query axis derived from cosine similarity to the prototype token.
    """
    if f_q.shape[0] < 1:
        raise DomainError("local prototype needs at least one query")
    if p.shape[0] != f_q.shape[1] or p.shape[1] != f_q.shape[2]:
        raise ShapeError(f"prototype {p.shape} incompatible with queries {f_q.shape}")
    length, width = p.shape
    dots = (p.reshape(1, length, width) * f_q).sum(axis=2)          # (B, L)
    norm_p = (p * p).sum(axis=1).sqrt().reshape(1, length)          # (1, L)
    norm_q = (f_q * f_q).sum(axis=2).sqrt()                         # (B, L)
    a_loc = _guarded_cosine(dots, norm_p, norm_q).transpose()       # (L, B)
    weights = softmax_last_axis(a_loc)                              # (L, B)
    tokens = f_q.transpose(1, 0, 2)                                 # (L, B, D')
    p_loc = (weights.reshape(length, f_q.shape[0], 1) * tokens).sum(axis=1)
    return p_loc, a_loc


def global_prototype(p: Tensor, f_q: Tensor) -> tuple[Tensor, Tensor]:
    """Video-level refinement: (P_glb (1 x D'), A_glb (1 x B))."""
    if f_q.shape[0] < 1:
        raise DomainError("global prototype needs at least one query")
    p_avg = p.mean(axis=0, keepdims=True)                           # (1, D')
    q_avg = f_q.mean(axis=1)                                        # (B, D')
    dots = (p_avg * q_avg).sum(axis=1).reshape(1, -1)               # (1, B)
    norm_p = (p_avg * p_avg).sum(axis=1).sqrt().reshape(1, 1)
    norm_q = (q_avg * q_avg).sum(axis=1).sqrt().reshape(1, -1)
    a_glb = _guarded_cosine(dots, norm_p, norm_q)                   # (1, B)
    weights = softmax_last_axis(a_glb)
    return weights @ q_avg, a_glb


def combine(p: Tensor, p_loc: Tensor, p_glb: Tensor, alpha) -> Tensor:
    """refined = (P + alpha*P_loc + (1-alpha)*P_glb) / 2, P_glb broadcast."""
    return (p + alpha * p_loc + (1.0 - alpha) * p_glb) * 0.5


def _fit_rows(x: np.ndarray, rows: int) -> np.ndarray:
    """Truncate or zero-pad a (L x D') array to exactly ``rows`` rows."""
    if x.shape[0] >= rows:
        return x[:rows]
    pad = np.zeros((rows - x.shape[0], x.shape[1]), dtype=x.dtype)
    return np.concatenate([x, pad], axis=0)


def _pair_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over both directions' per-token min Euclidean distances."""
    diff = a[:, None, :] - b[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def adaptive_alpha(protos_v, protos_t, queries_v, queries_t,
                   text_rows: int = 8) -> AlphaGate:
    """Deterministic per-episode gate over {0.1, 0.9}.

    Branch distances are averaged over every (prototype, query) pair; the
    visual branch uses all frame tokens, the textual branch is truncated or
    zero-padded to ``text_rows`` tokens to suppress prompt-length noise.
    Applied identically at training and inference; uses no labels. A missing
    textual branch falls back to 0.1 (visual side only), a missing visual
    branch to 0.9.
    """
    have_v = protos_v is not None and len(protos_v) and queries_v is not None \
        and all(np.asarray(p).shape[0] > 0 for p in protos_v)
    have_t = protos_t is not None and len(protos_t) and queries_t is not None \
        and all(np.asarray(p).shape[0] > 0 for p in protos_t) \
        and all(np.asarray(q).shape[0] > 0 for q in queries_t)
    if not have_t:
        return AlphaGate(ADAPTIVE_ALPHA_LOW, None, None, fallback="textual-missing")
    if not have_v:
        return AlphaGate(ADAPTIVE_ALPHA_HIGH, None, None, fallback="visual-missing")
    d_v = np.mean([_pair_distance(np.asarray(p, dtype=np.float64),
                                  np.asarray(q, dtype=np.float64))
                   for p in protos_v for q in queries_v])
    d_t = np.mean([_pair_distance(_fit_rows(np.asarray(p, dtype=np.float64), text_rows),
                                  _fit_rows(np.asarray(q, dtype=np.float64), text_rows))
                   for p in protos_t for q in queries_t])
    alpha = ADAPTIVE_ALPHA_LOW if d_v < d_t else ADAPTIVE_ALPHA_HIGH
    return AlphaGate(alpha, float(d_v), float(d_t))
