"""Feature enhancer: projection, attention stages, flags, parameter counts."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from fewact.attention import init_attention_params
from fewact.enhance import (EnhanceFlags, EnhanceParams, count_params,
                            downsample, enhance_textual, enhance_visual,
                            init_enhance_params)
from fewact.errors import ShapeError
from fewact.tensor import Tensor


def _params(rng, dim, width, heads=1):
    return init_enhance_params(rng, dim, width, heads=heads)


def _zero_output_projections(params: EnhanceParams):
    for block in (params.spatial_sa, params.temporal_sa,
                  params.visual_ca, params.textual_ca):
        block.wo.data[:] = 0.0
        block.bo.data[:] = 0.0


# -- downsample -----------------------------------------------------------------

def test_downsample_identity_projection():
    p = _params(np.random.default_rng(0), 5, 5)
    p.w_down.data[:] = np.eye(5)
    p.b_down.data[:] = 0.0
    x = np.random.default_rng(1).standard_normal((7, 5))
    assert_array_equal(downsample(Tensor(x), p).data, x)


def test_downsample_zero_input_gives_bias():
    p = _params(np.random.default_rng(0), 4, 3)
    out = downsample(Tensor(np.zeros((6, 4))), p)
    assert_allclose(out.data, np.tile(p.b_down.data, (6, 1)))


def test_downsample_shape_mismatch():
    p = _params(np.random.default_rng(0), 4, 3)
    with pytest.raises(ShapeError):
        downsample(Tensor(np.zeros((2, 5))), p)


def test_projection_parameter_count_at_reference_dims():
    p = _params(np.random.default_rng(0), 4096, 256)
    assert p.w_down.data.size + p.b_down.data.size == 1_048_832


# -- enhancement stages -----------------------------------------------------------

def test_zero_attention_reduces_to_spatial_mean():
    rng = np.random.default_rng(2)
    p = _params(rng, 4, 4)
    _zero_output_projections(p)
    tv = Tensor(rng.standard_normal((3, 5, 4)))
    tt = Tensor(rng.standard_normal((2, 4)))
    f_v, t_v_spt = enhance_visual(tv, tt, p, EnhanceFlags())
    expected = tv.data.mean(axis=1)
    assert_array_equal(f_v.data, expected)
    assert_array_equal(t_v_spt.data, expected)
    f_t = enhance_textual(tt, t_v_spt, p, EnhanceFlags())
    assert_array_equal(f_t.data, tt.data)


def test_single_token_pooling_is_identity():
    rng = np.random.default_rng(3)
    p = _params(rng, 4, 4)
    _zero_output_projections(p)
    tv = Tensor(rng.standard_normal((1, 1, 4)))
    _, t_v_spt = enhance_visual(tv, Tensor(np.zeros((0, 4))), p, EnhanceFlags())
    assert_array_equal(t_v_spt.data, tv.data[:, 0, :])


def _reference_attention(q, k, v, p):
    qp, kp, vp = q @ p.wq.data + p.bq.data, k @ p.wk.data + p.bk.data, v @ p.wv.data + p.bv.data
    scores = qp @ kp.T / np.sqrt(qp.shape[-1])
    scores -= scores.max(axis=-1, keepdims=True)
    w = np.exp(scores)
    w /= w.sum(axis=-1, keepdims=True)
    return (w @ vp) @ p.wo.data + p.bo.data


def _reference_enhance(tv, tt, p):
    """Hand transcription of the enhancement stages, composed stage by stage."""
    frames = tv.shape[0]
    t_v_sp = np.stack([(_reference_attention(tv[f], tv[f], tv[f], p.spatial_sa)
                        + tv[f]).mean(axis=0) for f in range(frames)])
    t_v_spt = _reference_attention(t_v_sp, t_v_sp, t_v_sp, p.temporal_sa) + t_v_sp
    f_v = _reference_attention(t_v_spt, tt, tt, p.visual_ca) + t_v_spt
    f_t = _reference_attention(tt, t_v_spt, t_v_spt, p.textual_ca) + tt
    return f_v, t_v_spt, f_t


def test_enhancement_matches_straight_line_reference():
    rng = np.random.default_rng(4)
    p = _params(rng, 6, 6)
    tv = rng.standard_normal((2, 4, 6))
    tt = rng.standard_normal((3, 6))
    f_v, t_v_spt = enhance_visual(Tensor(tv), Tensor(tt), p, EnhanceFlags())
    f_t = enhance_textual(Tensor(tt), t_v_spt, p, EnhanceFlags())
    ref_fv, ref_spt, ref_ft = _reference_enhance(tv, tt, p)
    assert_allclose(t_v_spt.data, ref_spt, atol=1e-12)
    assert_allclose(f_v.data, ref_fv, atol=1e-12)
    assert_allclose(f_t.data, ref_ft, atol=1e-12)


def test_flag_bypasses_are_bit_exact():
    rng = np.random.default_rng(5)
    p = _params(rng, 4, 4)
    tv = Tensor(rng.standard_normal((2, 3, 4)))
    tt = Tensor(rng.standard_normal((2, 4)))
    f_v, t_v_spt = enhance_visual(tv, tt, p, EnhanceFlags(st_sa=False, v_ca=False))
    assert_array_equal(t_v_spt.data, tv.data.mean(axis=1))
    assert f_v is t_v_spt
    f_t = enhance_textual(tt, t_v_spt, p, EnhanceFlags(t_ca=False))
    assert f_t is tt


def test_empty_textual_skips_cross_attention():
    rng = np.random.default_rng(6)
    p = _params(rng, 4, 4)
    tv = Tensor(rng.standard_normal((2, 3, 4)))
    empty = Tensor(np.zeros((0, 4)))
    f_v, t_v_spt = enhance_visual(tv, empty, p, EnhanceFlags())
    assert f_v is t_v_spt
    assert enhance_textual(empty, t_v_spt, p, EnhanceFlags()).shape == (0, 4)


def test_spatial_permutation_invariance_of_pooled_tokens():
    rng = np.random.default_rng(7)
    p = _params(rng, 4, 4)
    tv = rng.standard_normal((2, 5, 4))
    perm = rng.permutation(5)
    _, spt_a = enhance_visual(Tensor(tv), Tensor(np.zeros((0, 4))), p, EnhanceFlags())
    _, spt_b = enhance_visual(Tensor(tv[:, perm]), Tensor(np.zeros((0, 4))), p,
                              EnhanceFlags())
    assert_allclose(spt_a.data, spt_b.data, atol=1e-12)


# -- parameter counting -------------------------------------------------------------

def _hand_count(dim, width, heads=1):
    proj = dim * width + width
    block = 4 * (width * width + width)
    return proj + 4 * block + 1


def test_count_params_matches_hand_sum():
    p = _params(np.random.default_rng(0), 32, 16)
    assert count_params(p) == _hand_count(32, 16)


def test_count_params_monotone_in_width():
    small = count_params(_params(np.random.default_rng(0), 4096, 128))
    big = count_params(_params(np.random.default_rng(0), 4096, 256))
    assert small < big


def test_count_params_superlinear_growth():
    c128 = count_params(_params(np.random.default_rng(0), 4096, 128))
    c256 = count_params(_params(np.random.default_rng(0), 4096, 256))
    c512 = count_params(_params(np.random.default_rng(0), 4096, 512))
    assert (c512 - c256) > (c256 - c128)


def test_no_projection_params():
    p = init_enhance_params(np.random.default_rng(0), 8, None)
    assert p.w_down is None
    assert p.width == 8
    assert count_params(p) == 4 * 4 * (64 + 8) + 1
