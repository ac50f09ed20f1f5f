"""Word-level channel and pixel attention, plus reference dot-product attention.

Both modules re-weight a feature map with weights derived from the
word-context matrix E (B, M, T), then blend the result back through a
learnable residual gate (gamma) initialized to 0, so each module starts as
an exact identity.

Shape conventions inside the modules:
  - pooled channel queries are materialized as (C, C) with each channel's
    query value repeated along the contraction axis; pixel queries as
    (H*W, C) built the same way from per-pixel pooled values
  - word attention rows are normalized over T, final weights over C or H*W
  - dot products carry no 1/sqrt(d) scaling (the reference
    scaled_dot_attention below does scale)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import DimensionError
from .tensor import ParamStore, Tensor


@dataclass
class ColumnMap:
    """Per-column linear map M -> C applied to E, i.e. a 1x1 conv over T."""

    w: Tensor                # (C, M)
    b: Tensor                # (C, 1)


@dataclass
class CamParams:
    conv_aq_w: Tensor        # (C, C) query map for avg-pooled features
    conv_aq_b: Tensor        # (C,)
    conv_mq_w: Tensor        # (C, C) query map for max-pooled features
    conv_mq_b: Tensor        # (C,)
    key: ColumnMap           # M -> C, ReLU
    value: ColumnMap         # M -> C, ReLU
    fc_ga_w: Tensor          # (C, 1) gate from avg-pooled features
    fc_ga_b: Tensor          # (1,)
    fc_gm_w: Tensor          # (C, 1) gate from max-pooled features
    fc_gm_b: Tensor          # (1,)
    gamma: Tensor            # scalar, init exactly 0


@dataclass
class PamParams:
    key: ColumnMap           # M -> C, ReLU
    value: ColumnMap         # M -> C, ReLU
    conv_con_w: Tensor       # (1, 1, 2C, C) fusion conv
    conv_con_b: Tensor       # (C,)
    gamma: Tensor            # scalar, init exactly 0


@dataclass
class AttentionTrace:
    """Intermediate attention quantities captured for inspection."""

    importance: np.ndarray        # (B, 1, T)
    attn_avg: np.ndarray          # (B, C, T) or (B, H*W, T)
    attn_max: np.ndarray
    weights_avg: np.ndarray       # (B, C, 1) or (B, H*W, 1)
    weights_max: np.ndarray

    def to_text(self) -> str:
        lines = []
        for name in ("importance", "attn_avg", "attn_max", "weights_avg",
                     "weights_max"):
            arr = getattr(self, name)
            shape = "x".join(str(d) for d in arr.shape)
            vals = " ".join(f"{v:.8g}" for v in arr.ravel())
            lines.append(f"{name} [{shape}]: {vals}")
        return "\n".join(lines) + "\n"


def build_column_map(channels: int, embed_dim: int, store: ParamStore,
                     rng: np.random.Generator, prefix: str,
                     dtype=np.float64) -> ColumnMap:
    return ColumnMap(
        w=store.add(f"{prefix}.w",
                    Tensor(rng.normal(0.0, 0.02,
                                      size=(channels, embed_dim)).astype(dtype))),
        b=store.add(f"{prefix}.b", Tensor(np.zeros((channels, 1), dtype=dtype))),
    )


def build_cam(channels: int, embed_dim: int, store: ParamStore,
              rng: np.random.Generator, prefix: str,
              dtype=np.float64) -> CamParams:
    def param(name, arr):
        return store.add(f"{prefix}.{name}", Tensor(arr.astype(dtype)))
    c = channels
    return CamParams(
        conv_aq_w=param("aq_w", rng.normal(0.0, 0.02, size=(c, c))),
        conv_aq_b=param("aq_b", np.zeros(c)),
        conv_mq_w=param("mq_w", rng.normal(0.0, 0.02, size=(c, c))),
        conv_mq_b=param("mq_b", np.zeros(c)),
        key=build_column_map(c, embed_dim, store, rng, f"{prefix}.key", dtype),
        value=build_column_map(c, embed_dim, store, rng, f"{prefix}.value",
                               dtype),
        fc_ga_w=param("ga_w", rng.normal(0.0, 0.02, size=(c, 1))),
        fc_ga_b=param("ga_b", np.zeros(1)),
        fc_gm_w=param("gm_w", rng.normal(0.0, 0.02, size=(c, 1))),
        fc_gm_b=param("gm_b", np.zeros(1)),
        gamma=param("gamma", np.zeros(())),
    )


def build_pam(channels: int, embed_dim: int, store: ParamStore,
              rng: np.random.Generator, prefix: str,
              dtype=np.float64) -> PamParams:
    def param(name, arr):
        return store.add(f"{prefix}.{name}", Tensor(arr.astype(dtype)))
    c = channels
    return PamParams(
        key=build_column_map(c, embed_dim, store, rng, f"{prefix}.key", dtype),
        value=build_column_map(c, embed_dim, store, rng, f"{prefix}.value",
                               dtype),
        conv_con_w=param("con_w",
                         rng.normal(0.0, 0.02, size=(1, 1, 2 * c, c))),
        conv_con_b=param("con_b", np.zeros(c)),
        gamma=param("gamma", np.zeros(())),
    )


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(q k^T / sqrt(d)) v for a single query vector."""
    if q.data.ndim != 1:
        raise DimensionError(f"query must be 1-D, got {q.shape}")
    if k.data.ndim != 2 or v.data.ndim != 2:
        raise DimensionError(
            f"keys/values must be 2-D, got {k.shape} and {v.shape}")
    n, d = k.data.shape
    if q.data.shape[0] != d or v.data.shape != (n, d):
        raise DimensionError(
            f"attention dims disagree: q {q.shape}, K {k.shape}, V {v.shape}")
    scale = Tensor(np.asarray(1.0 / np.sqrt(d), dtype=q.dtype))
    scores = T.mul(T.matmul(T.reshape(q, (1, d)),
                            T.transpose(k, (1, 0))), scale)
    weights = T.softmax(scores, axis=1)
    return T.reshape(T.matmul(weights, v), (d,))


def _apply_column_map(e: Tensor, cmap: ColumnMap) -> Tensor:
    """ReLU(W E + b) applied per word column: (B, M, T) -> (B, C, T)."""
    if e.data.ndim != 3:
        raise DimensionError(f"word matrix must be (B,M,T), got {e.shape}")
    if e.data.shape[1] != cmap.w.data.shape[1]:
        raise DimensionError(
            f"word dim {e.shape} does not match map {cmap.w.shape}")
    return T.relu(T.add(T.matmul(cmap.w, e), cmap.b))


def contextual_importance(e: Tensor, value_map: ColumnMap) -> Tensor:
    """Per-word importance (B, 1, T): mean of the value rows times the values."""
    f_v = _apply_column_map(e, value_map)
    row_mean = T.transpose(T.mean(f_v, axis=2, keepdims=True), (0, 2, 1))
    return T.matmul(row_mean, f_v)


def _repeat_query(q_col: Tensor, width: int) -> Tensor:
    """Materialize (B, n, 1) -> (B, n, width) by repeating along the last axis."""
    ones = Tensor(np.ones((1, 1, width), dtype=q_col.dtype))
    return T.matmul(q_col, ones)


def channel_attention(f_c: Tensor, e: Tensor, params: CamParams,
                      trace: Optional[list] = None) -> Tensor:
    """Re-weight channels by word-conditioned attention; identity at init."""
    if f_c.data.ndim != 4:
        raise DimensionError(f"feature map must be (B,H,W,C), got {f_c.shape}")
    bsz, h, w, c = f_c.data.shape
    if params.conv_aq_w.data.shape[0] != c:
        raise DimensionError(
            f"channel count {c} does not match params {params.conv_aq_w.shape}")

    pooled_avg = T.reshape(T.global_avg_pool(f_c), (bsz, c))
    pooled_max = T.reshape(T.global_max_pool(f_c), (bsz, c))
    q_a = T.add(T.matmul(pooled_avg, params.conv_aq_w), params.conv_aq_b)
    q_m = T.add(T.matmul(pooled_max, params.conv_mq_w), params.conv_mq_b)

    f_ck = _apply_column_map(e, params.key)                     # (B, C, T)
    e_ci = contextual_importance(e, params.value)               # (B, 1, T)
    e_ci_t = T.transpose(e_ci, (0, 2, 1))                       # (B, T, 1)

    ca_a = T.softmax(T.matmul(_repeat_query(T.reshape(q_a, (bsz, c, 1)), c),
                              f_ck), axis=2)
    ca_m = T.softmax(T.matmul(_repeat_query(T.reshape(q_m, (bsz, c, 1)), c),
                              f_ck), axis=2)
    w_ca = T.softmax(T.matmul(ca_a, e_ci_t), axis=1)            # (B, C, 1)
    w_cm = T.softmax(T.matmul(ca_m, e_ci_t), axis=1)

    f_caw = T.mul(T.reshape(w_ca, (bsz, 1, 1, c)), f_c)
    f_cmw = T.mul(T.reshape(w_cm, (bsz, 1, 1, c)), f_c)

    gate = T.sigmoid(T.add(
        T.add(T.matmul(pooled_avg, params.fc_ga_w), params.fc_ga_b),
        T.add(T.matmul(pooled_max, params.fc_gm_w), params.fc_gm_b)))
    gate = T.reshape(gate, (bsz, 1, 1, 1))
    one = Tensor(np.asarray(1.0, dtype=f_c.dtype))
    f_cw = T.add(T.mul(gate, f_caw), T.mul(T.sub(one, gate), f_cmw))

    if trace is not None:
        trace.append(AttentionTrace(
            importance=e_ci.data.copy(), attn_avg=ca_a.data.copy(),
            attn_max=ca_m.data.copy(), weights_avg=w_ca.data.copy(),
            weights_max=w_cm.data.copy()))
    return T.add(T.mul(params.gamma, f_cw), f_c)


def pixel_attention(f_s: Tensor, e: Tensor, params: PamParams,
                    trace: Optional[list] = None) -> Tensor:
    """Re-weight pixels by word-conditioned attention; identity at init."""
    if f_s.data.ndim != 4:
        raise DimensionError(f"feature map must be (B,H,W,C), got {f_s.shape}")
    bsz, h, w, c = f_s.data.shape
    if params.conv_con_w.data.shape[2] != 2 * c:
        raise DimensionError(
            f"channel count {c} does not match fusion conv "
            f"{params.conv_con_w.shape}")
    hw = h * w

    p_a = T.reshape(T.spatial_mean(f_s), (bsz, hw, 1))
    p_m = T.reshape(T.spatial_max(f_s), (bsz, hw, 1))

    f_sk = _apply_column_map(e, params.key)                     # (B, C, T)
    e_si = contextual_importance(e, params.value)               # (B, 1, T)
    e_si_t = T.transpose(e_si, (0, 2, 1))

    sa_a = T.softmax(T.matmul(_repeat_query(p_a, c), f_sk), axis=2)
    sa_m = T.softmax(T.matmul(_repeat_query(p_m, c), f_sk), axis=2)
    w_sa = T.softmax(T.matmul(sa_a, e_si_t), axis=1)            # (B, HW, 1)
    w_sm = T.softmax(T.matmul(sa_m, e_si_t), axis=1)

    f_saw = T.mul(T.reshape(w_sa, (bsz, h, w, 1)), f_s)
    f_smw = T.mul(T.reshape(w_sm, (bsz, h, w, 1)), f_s)
    fused = T.relu(T.conv2d(T.concat([f_saw, f_smw], axis=3),
                            params.conv_con_w, params.conv_con_b))

    if trace is not None:
        trace.append(AttentionTrace(
            importance=e_si.data.copy(), attn_avg=sa_a.data.copy(),
            attn_max=sa_m.data.copy(), weights_avg=w_sa.data.copy(),
            weights_max=w_sm.data.copy()))
    return T.add(T.mul(params.gamma, fused), f_s)
