"""Conditional image generator: dual-residual blocks, word/sentence
modulation, and a dense bottleneck that restores latent-code influence.

Layout (desk default): a dense stem projects z to a 4x4 map, blocks are
separated by nearest-neighbor x2 upsampling, the flatten-dense-reshape
bottleneck sits after the configured block, and a final 3x3 conv + tanh
emits an RGB image in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor as T
from .attention import (CamParams, PamParams, build_cam, build_pam,
                        channel_attention, pixel_attention)
from .errors import ConfigError, DimensionError
from .norm import CadaIlnParams, build_cadailn, cadailn
from .tensor import ParamStore, Tensor


def default_channel_schedule(num_blocks: int, base: int) -> tuple[int, ...]:
    """Constant width until the last two blocks, then halved per block."""
    sched = []
    for i in range(1, num_blocks + 1):
        halvings = max(0, i - (num_blocks - 2))
        sched.append(max(1, base >> halvings))
    return tuple(sched)


@dataclass
class GeneratorConfig:
    latent_dim: int = 100
    init_spatial: int = 4
    base_channels: int = 64
    num_blocks: int = 4
    fc_insert_after: Optional[int] = 2
    fc_layers: int = 1
    output_resolution: int = 32
    channels: Optional[tuple[int, ...]] = None
    embed_dim: int = 32
    sent_dim: int = 32
    out_channels: int = 3
    use_cam: bool = True
    use_pam: bool = True
    use_cadailn: bool = True

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.num_blocks < 1:
            raise ConfigError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if self.fc_insert_after is not None and not (
                1 <= self.fc_insert_after <= self.num_blocks):
            raise ConfigError(
                f"fc_insert_after {self.fc_insert_after} outside "
                f"1..{self.num_blocks}")
        if self.fc_layers < 1:
            raise ConfigError(f"fc_layers must be >= 1, got {self.fc_layers}")
        expected = self.init_spatial * 2 ** (self.num_blocks - 1)
        if self.output_resolution != expected:
            raise ConfigError(
                f"output_resolution {self.output_resolution} != "
                f"init_spatial * 2^(num_blocks-1) = {expected}")
        if self.channels is None:
            self.channels = default_channel_schedule(self.num_blocks,
                                                     self.base_channels)
        else:
            self.channels = tuple(self.channels)
        if len(self.channels) != self.num_blocks:
            raise ConfigError(
                f"channel schedule has {len(self.channels)} entries for "
                f"{self.num_blocks} blocks")

    def spatial_after_block(self, i: int) -> int:
        return self.init_spatial * 2 ** (i - 1)

    def fc_width(self) -> int:
        if self.fc_insert_after is None:
            return 0
        side = self.spatial_after_block(self.fc_insert_after)
        return side * side * self.channels[self.fc_insert_after - 1]


@dataclass
class Conv2dParams:
    w: Tensor
    b: Tensor


@dataclass
class ResidualModuleParams:
    conv: Conv2dParams                      # 3x3 Cin -> Cout
    norm: Optional[CadaIlnParams]
    cam: Optional[CamParams]
    pam: Optional[PamParams]
    shortcut: Optional[Conv2dParams]        # 1x1 Cin -> Cout on width change


@dataclass
class DualResidualBlockParams:
    res1: ResidualModuleParams
    bridge_conv: Conv2dParams               # 3x3 Cout -> Cout
    bridge_norm: Optional[CadaIlnParams]
    res2: ResidualModuleParams


@dataclass
class GeneratorParams:
    stem_w: Tensor                          # (latent, init^2 * C1)
    stem_b: Tensor
    blocks: list[DualResidualBlockParams]
    fc: list[tuple[Tensor, Tensor]]         # bottleneck (w, b) layers
    out_conv: Conv2dParams
    config: GeneratorConfig = field(repr=False, default=None)


def _conv_params(store: ParamStore, name: str, kh: int, kw: int, cin: int,
                 cout: int, rng: np.random.Generator, dtype) -> Conv2dParams:
    return Conv2dParams(
        w=store.add(f"{name}.w",
                    Tensor(rng.normal(0.0, 0.02,
                                      size=(kh, kw, cin, cout)).astype(dtype))),
        b=store.add(f"{name}.b", Tensor(np.zeros(cout, dtype=dtype))),
    )


def _residual_module(cfg: GeneratorConfig, store: ParamStore, name: str,
                     cin: int, cout: int, rng, dtype) -> ResidualModuleParams:
    return ResidualModuleParams(
        conv=_conv_params(store, f"{name}.conv", 3, 3, cin, cout, rng, dtype),
        norm=(build_cadailn(cout, cfg.sent_dim, store, rng, f"{name}.norm",
                            dtype) if cfg.use_cadailn else None),
        cam=(build_cam(cout, cfg.embed_dim, store, rng, f"{name}.cam", dtype)
             if cfg.use_cam else None),
        pam=(build_pam(cout, cfg.embed_dim, store, rng, f"{name}.pam", dtype)
             if cfg.use_pam else None),
        shortcut=(None if cin == cout else
                  _conv_params(store, f"{name}.shortcut", 1, 1, cin, cout,
                               rng, dtype)),
    )


def build_generator(cfg: GeneratorConfig, store: ParamStore,
                    rng: np.random.Generator, prefix: str = "gen",
                    dtype=np.float64) -> GeneratorParams:
    c1 = cfg.channels[0]
    stem_out = cfg.init_spatial ** 2 * c1
    stem_w = store.add(f"{prefix}.stem.w",
                       Tensor(rng.normal(0.0, 0.02,
                                         size=(cfg.latent_dim,
                                               stem_out)).astype(dtype)))
    stem_b = store.add(f"{prefix}.stem.b", Tensor(np.zeros(stem_out,
                                                           dtype=dtype)))
    blocks = []
    cin = c1
    for i in range(1, cfg.num_blocks + 1):
        cout = cfg.channels[i - 1]
        name = f"{prefix}.block{i}"
        blocks.append(DualResidualBlockParams(
            res1=_residual_module(cfg, store, f"{name}.res1", cin, cout,
                                  rng, dtype),
            bridge_conv=_conv_params(store, f"{name}.bridge.conv", 3, 3,
                                     cout, cout, rng, dtype),
            bridge_norm=(build_cadailn(cout, cfg.sent_dim, store, rng,
                                       f"{name}.bridge.norm", dtype)
                         if cfg.use_cadailn else None),
            res2=_residual_module(cfg, store, f"{name}.res2", cout, cout,
                                  rng, dtype),
        ))
        cin = cout

    fc_layers: list[tuple[Tensor, Tensor]] = []
    if cfg.fc_insert_after is not None:
        width = cfg.fc_width()
        for j in range(cfg.fc_layers):
            # identity init keeps signal scale through the bottleneck
            w = store.add(f"{prefix}.fc{j}.w",
                          Tensor(np.eye(width, dtype=dtype)))
            b = store.add(f"{prefix}.fc{j}.b",
                          Tensor(np.zeros(width, dtype=dtype)))
            fc_layers.append((w, b))

    out_conv = _conv_params(store, f"{prefix}.out", 3, 3, cfg.channels[-1],
                            cfg.out_channels, rng, dtype)
    return GeneratorParams(stem_w=stem_w, stem_b=stem_b, blocks=blocks,
                           fc=fc_layers, out_conv=out_conv, config=cfg)


def residual_module(x: Tensor, e: Tensor, s: Tensor,
                    params: ResidualModuleParams) -> Tensor:
    """conv -> norm -> relu -> channel attn -> pixel attn, plus shortcut."""
    h = T.conv2d(x, params.conv.w, params.conv.b, padding="same")
    if params.norm is not None:
        h = cadailn(h, s, params.norm)
    h = T.relu(h)
    if params.cam is not None:
        h = channel_attention(h, e, params.cam)
    if params.pam is not None:
        h = pixel_attention(h, e, params.pam)
    base = x if params.shortcut is None else T.conv2d(
        x, params.shortcut.w, params.shortcut.b)
    return T.add(h, base)


def dual_residual_block(x: Tensor, e: Tensor, s: Tensor,
                        params: DualResidualBlockParams) -> Tensor:
    """residual module -> conv/norm/relu bridge -> residual module."""
    h = residual_module(x, e, s, params.res1)
    h2 = T.conv2d(h, params.bridge_conv.w, params.bridge_conv.b,
                  padding="same")
    if params.bridge_norm is not None:
        h2 = cadailn(h2, s, params.bridge_norm)
    h2 = T.relu(h2)
    return residual_module(h2, e, s, params.res2)


def fc_bottleneck(x: Tensor, layers: list[tuple[Tensor, Tensor]]) -> Tensor:
    """Flatten each sample, apply dimension-preserving dense maps, reshape."""
    bsz = x.data.shape[0]
    width = int(np.prod(x.data.shape[1:]))
    if not layers:
        raise ConfigError("fc_bottleneck called with no dense layers")
    if layers[0][0].data.shape[0] != width:
        raise ConfigError(
            f"flattened size {width} does not match bottleneck "
            f"{layers[0][0].shape}")
    h = T.reshape(x, (bsz, width))
    for w, b in layers:
        h = T.add(T.matmul(h, w), b)
    return T.reshape(h, x.data.shape)


def generate(z: Tensor, e: Tensor, s: Tensor,
             params: GeneratorParams) -> Tensor:
    """Sample images (B, R, R, 3) in [-1, 1] from latent codes (B, latent)."""
    cfg = params.config
    if z.data.ndim != 2 or z.data.shape[1] != cfg.latent_dim:
        raise DimensionError(
            f"latent batch must be (B, {cfg.latent_dim}), got {z.shape}")
    bsz = z.data.shape[0]
    x = T.reshape(T.add(T.matmul(z, params.stem_w), params.stem_b),
                  (bsz, cfg.init_spatial, cfg.init_spatial, cfg.channels[0]))
    for i, block in enumerate(params.blocks, start=1):
        if i > 1:
            x = T.upsample_nearest2x(x)
        x = dual_residual_block(x, e, s, block)
        if cfg.fc_insert_after == i:
            x = fc_bottleneck(x, params.fc)
    return T.tanh(T.conv2d(x, params.out_conv.w, params.out_conv.b,
                           padding="same"))
