"""Matching metrics against hand examples and a brute-force oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fewact.errors import DomainError
from fewact.gradcheck import finite_diff_check
from fewact.metrics import (bimhm_distance, hausdorff_distance, mpmm_distance,
                            pooled_cosine_score, token_min_distances, top_u_sum)
from fewact.tensor import Tensor


def _t(x):
    return Tensor(np.asarray(x, dtype=np.float64))


# -- brute-force oracle: full pairwise table, explicit sort -----------------------

def brute_min_vectors(s_v, s_t, q_v, q_t):
    d_s, d_q = [], []
    for s, q in ((s_v, q_v), (s_t, q_t)):
        if s is None or q is None or len(s) == 0 or len(q) == 0:
            continue
        table = [[float(np.linalg.norm(np.asarray(sh) - np.asarray(qj)))
                  for qj in q] for sh in s]
        d_s.extend(min(row) for row in table)
        d_q.extend(min(table[i][j] for i in range(len(s))) for j in range(len(q)))
    return d_s, d_q


def brute_mpmm(s_v, s_t, q_v, q_t, u):
    d_s, d_q = brute_min_vectors(s_v, s_t, q_v, q_t)
    return (sum(sorted(d_s, reverse=True)[:u]) + sum(sorted(d_q, reverse=True)[:u])) / u


def brute_bimhm(s_v, s_t, q_v, q_t):
    total = 0.0
    for s, q in ((s_v, q_v), (s_t, q_t)):
        if s is None or q is None or len(s) == 0 or len(q) == 0:
            continue
        table = np.array([[np.linalg.norm(np.asarray(sh) - np.asarray(qj))
                           for qj in q] for sh in s])
        total += table.min(axis=1).mean() + table.min(axis=0).mean()
    return total


def brute_hausdorff(s_v, s_t, q_v, q_t):
    total = 0.0
    for s, q in ((s_v, q_v), (s_t, q_t)):
        if s is None or q is None or len(s) == 0 or len(q) == 0:
            continue
        table = np.array([[np.linalg.norm(np.asarray(sh) - np.asarray(qj))
                           for qj in q] for sh in s])
        total += max(table.min(axis=1).max(), table.min(axis=0).max())
    return total


# -- hand examples ------------------------------------------------------------------

HAND = dict(s_v=[[0.0], [1.0]], q_v=[[0.0], [2.0]], s_t=[[1.0]], q_t=[[1.0]])


def test_token_min_distances_hand_example():
    d_s, d_q = token_min_distances(_t(HAND["s_v"]), _t(HAND["s_t"]),
                                   _t(HAND["q_v"]), _t(HAND["q_t"]))
    assert_allclose(d_s.data, [0.0, 1.0, 0.0])
    assert_allclose(d_q.data, [0.0, 1.0, 0.0])


def test_mpmm_hand_example():
    d_s, d_q = token_min_distances(_t(HAND["s_v"]), _t(HAND["s_t"]),
                                   _t(HAND["q_v"]), _t(HAND["q_t"]))
    assert mpmm_distance(d_s, d_q, u=1).item() == pytest.approx(2.0)


def test_bimhm_hand_example():
    out = bimhm_distance(_t(HAND["s_v"]), _t(HAND["s_t"]),
                         _t(HAND["q_v"]), _t(HAND["q_t"]))
    assert out.item() == pytest.approx(1.0)


def test_hausdorff_hand_example():
    out = hausdorff_distance(_t(HAND["s_v"]), _t(HAND["s_t"]),
                             _t(HAND["q_v"]), _t(HAND["q_t"]))
    assert out.item() == pytest.approx(1.0)


def test_identical_videos_zero_everywhere():
    rng = np.random.default_rng(0)
    v = _t(rng.standard_normal((3, 4)))
    t = _t(rng.standard_normal((2, 4)))
    d_s, d_q = token_min_distances(v, t, v, t)
    assert_allclose(d_s.data, 0.0, atol=1e-12)
    for u in (1, 3, 10):
        assert mpmm_distance(d_s, d_q, u).item() == pytest.approx(0.0, abs=1e-12)
    assert bimhm_distance(v, t, v, t).item() == pytest.approx(0.0, abs=1e-12)
    assert hausdorff_distance(v, t, v, t).item() == pytest.approx(0.0, abs=1e-12)


def test_u_clamp_keeps_single_divisor():
    d_s, d_q = _t([3.0, 1.0]), _t([2.0])
    # u exceeds both lengths: full sums divided by u once
    assert mpmm_distance(d_s, d_q, u=5).item() == pytest.approx((4.0 + 2.0) / 5.0)


def test_query_permutation_leaves_metrics_unchanged():
    rng = np.random.default_rng(1)
    s_v, s_t = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    q_v, q_t = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    base = brute_mpmm(s_v, s_t, q_v, q_t, 3)
    d_s, d_q = token_min_distances(_t(s_v), _t(s_t),
                                   _t(q_v[rng.permutation(4)]),
                                   _t(q_t[rng.permutation(5)]))
    assert mpmm_distance(d_s, d_q, 3).item() == pytest.approx(base, abs=1e-12)


def test_duplicate_support_token_never_increases_hausdorff():
    rng = np.random.default_rng(2)
    s_v, q_v = rng.standard_normal((3, 2)), rng.standard_normal((4, 2))
    base = hausdorff_distance(_t(s_v), None, _t(q_v), None).item()
    dup = np.vstack([s_v, s_v[:1]])
    assert hausdorff_distance(_t(dup), None, _t(q_v), None).item() <= base + 1e-12


def test_homogeneity_under_positive_scaling():
    rng = np.random.default_rng(3)
    s_v, s_t = rng.standard_normal((3, 2)), rng.standard_normal((2, 2))
    q_v, q_t = rng.standard_normal((3, 2)), rng.standard_normal((2, 2))
    c = 2.5
    for fn in (bimhm_distance, hausdorff_distance):
        a = fn(_t(s_v), _t(s_t), _t(q_v), _t(q_t)).item()
        b = fn(_t(c * s_v), _t(c * s_t), _t(c * q_v), _t(c * q_t)).item()
        assert b == pytest.approx(c * a, rel=1e-12)


def test_partial_sum_monotonicity_in_u():
    rng = np.random.default_rng(4)
    d = _t(np.abs(rng.standard_normal(7)))
    sums = [top_u_sum(d, u).item() for u in range(1, 10)]
    assert all(b >= a - 1e-12 for a, b in zip(sums, sums[1:]))


def test_empty_inputs_rejected():
    with pytest.raises(DomainError):
        token_min_distances(None, None, None, None)
    with pytest.raises(DomainError):
        mpmm_distance(_t([1.0]), _t([1.0]), u=0)
    with pytest.raises(DomainError):
        bimhm_distance(_t(np.zeros((0, 2))), None, _t(np.zeros((0, 2))), None)


def test_branch_only_inputs():
    rng = np.random.default_rng(5)
    s_v, q_v = rng.standard_normal((3, 2)), rng.standard_normal((2, 2))
    d_s, d_q = token_min_distances(_t(s_v), None, _t(q_v), None)
    assert d_s.shape == (3,) and d_q.shape == (2,)
    ref_s, ref_q = brute_min_vectors(s_v, None, q_v, None)
    assert_allclose(d_s.data, ref_s, atol=1e-12)
    assert_allclose(d_q.data, ref_q, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 6), st.integers(1, 6),
       st.integers(1, 4), st.integers(1, 12), st.integers(0, 2 ** 31 - 1))
def test_metrics_match_brute_force(t_len, lt, q_len, dim, u, seed):
    rng = np.random.default_rng(seed)
    s_v, q_v = rng.standard_normal((t_len, dim)), rng.standard_normal((q_len, dim))
    s_t = rng.standard_normal((lt, dim)) if lt else None
    q_t = rng.standard_normal((lt, dim)) if lt else None
    ts_t = _t(s_t) if lt else None
    tq_t = _t(q_t) if lt else None
    d_s, d_q = token_min_distances(_t(s_v), ts_t, _t(q_v), tq_t)
    assert abs(mpmm_distance(d_s, d_q, u).item()
               - brute_mpmm(s_v, s_t, q_v, q_t, u)) < 1e-9
    assert abs(bimhm_distance(_t(s_v), ts_t, _t(q_v), tq_t).item()
               - brute_bimhm(s_v, s_t, q_v, q_t)) < 1e-9
    assert abs(hausdorff_distance(_t(s_v), ts_t, _t(q_v), tq_t).item()
               - brute_hausdorff(s_v, s_t, q_v, q_t)) < 1e-9


# -- pooled cosine -------------------------------------------------------------------

def test_pooled_cosine_identical_videos():
    rng = np.random.default_rng(6)
    v, t = rng.standard_normal((3, 4)), rng.standard_normal((2, 4))
    fused = pooled_cosine_score(v, t, v, t, decoupled=False).item()
    dec = pooled_cosine_score(v, t, v, t, decoupled=True).item()
    assert fused == pytest.approx(1.0)
    assert dec == pytest.approx(2.0)


def test_pooled_cosine_orthogonal_means():
    a = np.array([[1.0, 0.0]])
    b = np.array([[0.0, 1.0]])
    assert pooled_cosine_score(a, None, b, None, decoupled=True,
                               branch="visual").item() == pytest.approx(0.0)


def test_pooled_cosine_zero_norm_mean():
    a = np.array([[1.0, 0.0], [-1.0, 0.0]])
    b = np.array([[1.0, 1.0]])
    assert pooled_cosine_score(a, None, b, None, decoupled=True,
                               branch="visual").item() == 0.0


def test_pooled_cosine_fused_equals_full_token_mean():
    rng = np.random.default_rng(7)
    a_v, a_t = rng.standard_normal((2, 2, 3)), rng.standard_normal((3, 3))
    b_v, b_t = rng.standard_normal((2, 2, 3)), rng.standard_normal((1, 3))
    got = pooled_cosine_score(a_v, a_t, b_v, b_t, decoupled=False).item()
    ma = np.vstack([a_v.reshape(-1, 3), a_t]).mean(axis=0)
    mb = np.vstack([b_v.reshape(-1, 3), b_t]).mean(axis=0)
    want = float(ma @ mb / (np.linalg.norm(ma) * np.linalg.norm(mb)))
    assert got == pytest.approx(want, abs=1e-12)


def test_pooled_cosine_fused_rejects_branch_selection():
    a = np.ones((1, 2))
    with pytest.raises(DomainError):
        pooled_cosine_score(a, None, a, None, decoupled=False, branch="visual")


# -- gradients through the metric ----------------------------------------------------

def test_mpmm_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    s_v0 = rng.standard_normal((3, 3))
    q_v0 = rng.standard_normal((4, 3))
    s_t0 = rng.standard_normal((2, 3))
    q_t0 = rng.standard_normal((2, 3))

    def f(params):
        s_v, q_v, s_t, q_t = params
        d_s, d_q = token_min_distances(s_v, s_t, q_v, q_t)
        return mpmm_distance(d_s, d_q, u=2)

    assert finite_diff_check(f, [s_v0, q_v0, s_t0, q_t0], step=1e-6) < 1e-4
