"""Instance/layer normalization and the sentence-conditioned blend of both.

The conditional layer normalizes a feature map two ways, mixes the results
through a per-channel learnable ratio rho in [0, 1], then scales and
shifts with gamma/beta projected from the sentence vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError
from .tensor import ParamStore, Tensor


def _standardize(x: Tensor, mu: Tensor, var: Tensor, eps: float) -> Tensor:
    inv = T.power(T.add(var, Tensor(np.asarray(eps, dtype=x.dtype))), -0.5)
    return T.mul(T.sub(x, mu), inv)


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel standardization over H x W."""
    if x.data.ndim != 4:
        raise DimensionError(f"instance_norm expects (B,H,W,C), got {x.shape}")
    mu = T.mean(T.mean(x, axis=1, keepdims=True), axis=2, keepdims=True)
    diff = T.sub(x, mu)
    var = T.mean(T.mean(T.mul(diff, diff), axis=1, keepdims=True),
                 axis=2, keepdims=True)
    return _standardize(x, mu, var, eps)


def layer_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-sample standardization over all of H x W x C."""
    if x.data.ndim != 4:
        raise DimensionError(f"layer_norm expects (B,H,W,C), got {x.shape}")
    mu = x
    for axis in (1, 2, 3):
        mu = T.mean(mu, axis=axis, keepdims=True)
    diff = T.sub(x, mu)
    var = T.mul(diff, diff)
    for axis in (1, 2, 3):
        var = T.mean(var, axis=axis, keepdims=True)
    return _standardize(x, mu, var, eps)


@dataclass
class CadaIlnParams:
    w1: Tensor               # (D_s, C) -> gamma
    b1: Tensor               # (C,), init 1 so the layer starts neutral
    w2: Tensor               # (D_s, C) -> beta
    b2: Tensor               # (C,), init 0
    rho: Tensor              # (C,), clamped to [0, 1] after each step
    eps: float = 1e-5


def build_cadailn(channels: int, sent_dim: int, store: ParamStore,
                  rng: np.random.Generator, prefix: str,
                  dtype=np.float64) -> CadaIlnParams:
    def param(name, arr):
        return store.add(f"{prefix}.{name}", Tensor(arr.astype(dtype)))
    return CadaIlnParams(
        w1=param("w1", rng.normal(0.0, 0.02, size=(sent_dim, channels))),
        b1=param("b1", np.ones(channels)),
        w2=param("w2", rng.normal(0.0, 0.02, size=(sent_dim, channels))),
        b2=param("b2", np.zeros(channels)),
        rho=param("rho", np.full(channels, 0.5)),
    )


def cadailn(x: Tensor, s: Tensor, params: CadaIlnParams) -> Tensor:
    """Blend IN and LN by rho, then scale/shift with cues from ``s``.

    gamma = W1 s + b1 and beta = W2 s + b2, broadcast as (B,1,1,C).
    """
    if x.data.ndim != 4:
        raise DimensionError(f"cadailn expects (B,H,W,C), got {x.shape}")
    bsz, _, _, c = x.data.shape
    if params.rho.data.shape[0] != c:
        raise DimensionError(
            f"cadailn channels {c} do not match rho {params.rho.shape}")
    if s.data.ndim != 2 or s.data.shape[0] != bsz:
        raise DimensionError(
            f"sentence batch {s.shape} does not match feature batch {bsz}")
    if s.data.shape[1] != params.w1.data.shape[0]:
        raise DimensionError(
            f"sentence dim {s.shape} does not match projection "
            f"{params.w1.shape}")

    gamma = T.reshape(T.add(T.matmul(s, params.w1), params.b1),
                      (bsz, 1, 1, c))
    beta = T.reshape(T.add(T.matmul(s, params.w2), params.b2),
                     (bsz, 1, 1, c))
    rho = T.reshape(params.rho, (1, 1, 1, c))
    one = Tensor(np.asarray(1.0, dtype=x.dtype))
    blended = T.add(T.mul(rho, instance_norm(x, params.eps)),
                    T.mul(T.sub(one, rho), layer_norm(x, params.eps)))
    return T.add(T.mul(gamma, blended), beta)


def clamp_rho(store: ParamStore):
    """Project every rho parameter back into [0, 1] (post-optimizer hook)."""
    for p in store:
        if p.name.endswith(".rho"):
            np.clip(p.tensor.data, 0.0, 1.0, out=p.tensor.data)
