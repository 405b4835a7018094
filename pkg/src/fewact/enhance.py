"""Dual-branch feature enhancement over decoupled tokens.

Pipeline per video: an affine channel projection, per-frame spatial
self-attention pooled over space, temporal self-attention across frames, then
bidirectional cross-attention between the branches. Every attention stage adds
a residual; each stage can be bypassed via flags, reproducing the documented
fallbacks bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionParams, init_attention_params, scaled_dot_attention
from .errors import ShapeError
from .tensor import Tensor, uniform_param


@dataclass
class EnhanceFlags:
    st_sa: bool = True   # spatial+temporal self-attention stage
    v_ca: bool = True    # visual-lead cross-attention (textual keys/values)
    t_ca: bool = True    # textual-lead cross-attention (visual keys/values)


@dataclass
class EnhanceParams:
    """Trainable projection and attention weights; ``w_down`` may be None to
    run directly at the archive feature width."""

    feature_dim: int
    width: int
    w_down: Tensor | None
    b_down: Tensor | None
    spatial_sa: AttentionParams
    temporal_sa: AttentionParams
    visual_ca: AttentionParams
    textual_ca: AttentionParams

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        out = []
        if self.w_down is not None:
            out.append(("down.w", self.w_down))
            out.append(("down.b", self.b_down))
        for prefix, block in (("spatial_sa", self.spatial_sa),
                              ("temporal_sa", self.temporal_sa),
                              ("visual_ca", self.visual_ca),
                              ("textual_ca", self.textual_ca)):
            out.extend((f"{prefix}.{n}", t) for n, t in block.tensors())
        return out


def init_enhance_params(rng: np.random.Generator, feature_dim: int,
                        width: int | None, heads: int = 1) -> EnhanceParams:
    """Seeded init; projection omitted when ``width`` is None."""
    if width is None:
        w_down = b_down = None
        inner = feature_dim
    else:
        w_down = uniform_param(rng, (feature_dim, width), fan_in=feature_dim)
        b_down = uniform_param(rng, (width,), fan_in=feature_dim)
        inner = width
    return EnhanceParams(
        feature_dim=feature_dim, width=inner, w_down=w_down, b_down=b_down,
        spatial_sa=init_attention_params(rng, inner, heads),
        temporal_sa=init_attention_params(rng, inner, heads),
        visual_ca=init_attention_params(rng, inner, heads),
        textual_ca=init_attention_params(rng, inner, heads))


def downsample(tokens: Tensor, params: EnhanceParams) -> Tensor:
    """Per-token affine projection onto the working width."""
    if params.w_down is None:
        if tokens.shape[-1] != params.width:
            raise ShapeError(f"token dim {tokens.shape[-1]} != width {params.width}")
        return tokens
    if tokens.shape[-1] != params.w_down.shape[0]:
        raise ShapeError(f"token dim {tokens.shape[-1]} != projection input "
                         f"{params.w_down.shape[0]}")
    return tokens @ params.w_down + params.b_down


def enhance_visual(t_v: Tensor, t_t: Tensor, params: EnhanceParams,
                   flags: EnhanceFlags) -> tuple[Tensor, Tensor]:
    """(T x L_sp x D') visual tokens -> (F_v, T_v_spt), both (T x D').

    With st_sa off, the spatiotemporal stage collapses to the plain spatial
    mean. With v_ca off, or with no textual tokens to attend over, F_v is the
    spatiotemporal output unchanged.
    """
    if t_v.ndim != 3:
        raise ShapeError("visual tokens must be (frames, spatial, width)")
    if flags.st_sa:
        spatial = scaled_dot_attention(t_v, t_v, t_v, params.spatial_sa)
        t_v_sp = (spatial + t_v).mean(axis=1)
        t_v_spt = scaled_dot_attention(t_v_sp, t_v_sp, t_v_sp,
                                       params.temporal_sa) + t_v_sp
    else:
        t_v_spt = t_v.mean(axis=1)
    if flags.v_ca and t_t.shape[0] > 0:
        f_v = scaled_dot_attention(t_v_spt, t_t, t_t, params.visual_ca) + t_v_spt
    else:
        f_v = t_v_spt
    return f_v, t_v_spt


def enhance_textual(t_t: Tensor, t_v_spt: Tensor, params: EnhanceParams,
                    flags: EnhanceFlags) -> Tensor:
    """(L_t x D') textual tokens -> F_t via cross-attention over T_v_spt."""
    if t_t.shape[0] == 0:
        return t_t
    if flags.t_ca:
        return scaled_dot_attention(t_t, t_v_spt, t_v_spt, params.textual_ca) + t_t
    return t_t


def count_params(params: EnhanceParams) -> int:
    """Exact scalar-parameter count, including the prototype mixing scalar
    trained alongside these weights."""
    total = sum(t.data.size for _, t in params.named_tensors())
    return int(total) + 1
