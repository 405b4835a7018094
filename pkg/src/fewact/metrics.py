"""Distances between dual-branch query features and class prototypes.

The primary metric concatenates, per branch, each support token's min
Euclidean distance to the opposite side's tokens (and vice versa), then sums
the u largest entries of each direction and divides by u once:

    D = (1/u) * (sum top_u(d_support) + sum top_u(d_query))

Lower is better; classification logits are the negated distances. Baselines:
bidirectional mean-min per branch summed (bimhm), classical symmetrized
Hausdorff per branch summed, and pooled-cosine similarity with or without
branch decoupling (higher is better).
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError
from .tensor import Tensor, concat, where


def _nonempty(x: Tensor | None) -> bool:
    return x is not None and x.shape[0] > 0


def pairwise_distances(a: Tensor, b: Tensor) -> Tensor:
    """Euclidean distance matrix (n x m) between token sets (n x d), (m x d)."""
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"token dims differ: {a.shape} vs {b.shape}")
    n, d = a.shape
    m = b.shape[0]
    diff = a.reshape(n, 1, d) - b.reshape(1, m, d)
    return (diff * diff).sum(axis=2).sqrt()


def _branch_pairs(s_v, s_t, q_v, q_t):
    """Yield (support, query) tensors per branch with tokens on both sides."""
    pairs = []
    if _nonempty(s_v) and _nonempty(q_v):
        pairs.append((s_v, q_v))
    if _nonempty(s_t) and _nonempty(q_t):
        pairs.append((s_t, q_t))
    return pairs


def token_min_distances(s_v, s_t, q_v, q_t) -> tuple[Tensor, Tensor]:
    """Per-token min distances to the opposite side, concatenated over branches.

    Returns (d_s, d_q): support-side and query-side vectors. A branch with no
    tokens on either side contributes zero entries. Raises if no branch has
    tokens at all.
    """
    pairs = _branch_pairs(s_v, s_t, q_v, q_t)
    if not pairs:
        raise DomainError("no branch has tokens on both sides")
    d_s_parts, d_q_parts = [], []
    for s, q in pairs:
        dist = pairwise_distances(s, q)
        d_s_parts.append(dist.amin(axis=1))
        d_q_parts.append(dist.amin(axis=0))
    return concat(d_s_parts, axis=0), concat(d_q_parts, axis=0)


def top_u_sum(d: Tensor, u: int) -> Tensor:
    """Sum of the u largest entries (all entries when u exceeds the length)."""
    n = d.shape[0]
    if n == 0:
        raise DomainError("top-u over an empty vector")
    if u >= n:
        return d.sum()
    order = np.argsort(-d.data, kind="stable")[:u]
    return d.take(order, axis=0).sum()


def mpmm_distance(d_s: Tensor, d_q: Tensor, u: int) -> Tensor:
    """(1/u) * (sum top_u(d_s) + sum top_u(d_q)); u clamps per side."""
    if u < 1:
        raise DomainError(f"u must be >= 1, got {u}")
    if d_s.shape[0] == 0 or d_q.shape[0] == 0:
        raise DomainError("empty distance vectors")
    return (top_u_sum(d_s, u) + top_u_sum(d_q, u)) * (1.0 / u)


def bimhm_distance(s_v, s_t, q_v, q_t) -> Tensor:
    """Bidirectional mean-min distance per branch, summed over branches."""
    pairs = _branch_pairs(s_v, s_t, q_v, q_t)
    if not pairs:
        raise DomainError("no branch has tokens on both sides")
    total = None
    for s, q in pairs:
        dist = pairwise_distances(s, q)
        term = dist.amin(axis=1).mean() + dist.amin(axis=0).mean()
        total = term if total is None else total + term
    return total


def hausdorff_distance(s_v, s_t, q_v, q_t) -> Tensor:
    """Classical symmetrized Hausdorff per branch, summed over branches."""
    pairs = _branch_pairs(s_v, s_t, q_v, q_t)
    if not pairs:
        raise DomainError("no branch has tokens on both sides")
    total = None
    for s, q in pairs:
        dist = pairwise_distances(s, q)
        fwd = dist.amin(axis=1).amax(axis=0)
        bwd = dist.amin(axis=0).amax(axis=0)
        bigger = where(fwd.data >= bwd.data, fwd, bwd)
        total = bigger if total is None else total + bigger
    return total


def cosine_similarity(u: Tensor, v: Tensor) -> Tensor:
    """Scalar cosine between two vectors; 0 when either norm ~ 0."""
    u2, v2 = u.reshape(1, -1), v.reshape(1, -1)
    dot = (u2 * v2).sum()
    norm = ((u2 * u2).sum().sqrt() * (v2 * v2).sum().sqrt())
    ok = norm.data > 1e-12
    safe = where(ok, norm, Tensor(np.ones_like(norm.data)))
    return where(ok, dot / safe, Tensor(np.zeros_like(dot.data)))


def pooled_cosine_score(a_v, a_t, b_v, b_t, decoupled: bool,
                        branch: str = "both") -> Tensor:
    """Similarity between two videos' token sets (higher is better).

    decoupled=False: cosine of the means of the full token sets (token-count
    weighted, equivalent to pooling the fused matrices). decoupled=True: sum
    of per-branch cosines of branch-mean vectors; ``branch`` restricts which
    branches contribute.
    """
    a_v, a_t, b_v, b_t = (_flat(x) for x in (a_v, a_t, b_v, b_t))
    if not decoupled:
        if branch != "both":
            raise DomainError("fused pooling has no branch selection")
        a_all = _cat_nonempty(a_v, a_t)
        b_all = _cat_nonempty(b_v, b_t)
        return cosine_similarity(a_all.mean(axis=0), b_all.mean(axis=0))
    score = None
    if branch in ("both", "visual") and _nonempty(a_v) and _nonempty(b_v):
        score = cosine_similarity(a_v.mean(axis=0), b_v.mean(axis=0))
    if branch in ("both", "textual") and _nonempty(a_t) and _nonempty(b_t):
        term = cosine_similarity(a_t.mean(axis=0), b_t.mean(axis=0))
        score = term if score is None else score + term
    if score is None:
        raise DomainError("no branch has tokens on both sides")
    return score


def _flat(x) -> Tensor | None:
    if x is None:
        return None
    t = x if isinstance(x, Tensor) else Tensor(x)
    if t.ndim == 3:
        t = t.reshape(-1, t.shape[-1])
    return t


def _cat_nonempty(a, b) -> Tensor:
    parts = [x for x in (a, b) if _nonempty(x)]
    if not parts:
        raise DomainError("no tokens to pool")
    return parts[0] if len(parts) == 1 else concat(parts, axis=0)
