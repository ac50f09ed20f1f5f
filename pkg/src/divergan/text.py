"""Caption conditioning: closed vocabulary, word-context matrix, sentence vector.

A toy trainable encoder (embedding table plus two small tanh projections)
produces the per-word context matrix E (M x T) and the pooled sentence
vector s. It is trained jointly with the generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import LengthError, VocabularyError
from .tensor import ParamStore, Tensor

PAD_TOKEN = "<pad>"


class Vocabulary:
    """Ordered token list; index 0 is reserved for padding."""

    def __init__(self, tokens: list[str]):
        if tokens and tokens[0] == PAD_TOKEN:
            tokens = tokens[1:]
        ordered = [PAD_TOKEN] + list(tokens)
        if len(set(ordered)) != len(ordered):
            raise VocabularyError("duplicate tokens in vocabulary")
        self.tokens = ordered
        self._ids = {tok: i for i, tok in enumerate(ordered)}

    def __len__(self):
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise VocabularyError(f"unknown token {token!r}") from None

    def save(self, path: str | Path):
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln for ln in lines if ln])


def tokenize(caption: str, vocab: Vocabulary) -> list[int]:
    """Map a lowercase space-separated caption to vocabulary ids."""
    words = caption.split()
    if not words:
        raise LengthError("caption is empty")
    return [vocab.id_of(w) for w in words]


@dataclass
class EncoderConfig:
    vocab_size: int
    embed_dim: int = 32      # M, word-context rows
    sent_dim: int = 32       # D_s, sentence vector size
    t_max: int = 8


@dataclass
class EncoderParams:
    embed: Tensor            # (V, M)
    word_w: Tensor           # (M, M)
    word_b: Tensor           # (M,)
    sent_w: Tensor           # (M, D_s)
    sent_b: Tensor           # (D_s,)
    config: EncoderConfig


def build_encoder(cfg: EncoderConfig, store: ParamStore, rng: np.random.Generator,
                  prefix: str = "enc", dtype=np.float64) -> EncoderParams:
    def param(name, arr):
        return store.add(f"{prefix}.{name}", Tensor(arr.astype(dtype)))
    m, d = cfg.embed_dim, cfg.sent_dim
    return EncoderParams(
        embed=param("embed", rng.normal(0.0, 0.2, size=(cfg.vocab_size, m))),
        word_w=param("word_w", rng.normal(0.0, 0.2, size=(m, m))),
        word_b=param("word_b", np.zeros(m)),
        sent_w=param("sent_w", rng.normal(0.0, 0.2, size=(m, d))),
        sent_b=param("sent_b", np.zeros(d)),
        config=cfg,
    )


def encode(ids: np.ndarray, params: EncoderParams) -> tuple[Tensor, Tensor]:
    """Encode id batch (B, T) into E (B, M, T) and s (B, D_s).

    Each word column is its embedding through a linear+tanh layer; padding
    columns are zeroed. The sentence vector is the mean over non-pad
    columns pushed through a second linear+tanh layer.
    """
    ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
    bsz, t_len = ids.shape
    if t_len < 1 or not (ids != 0).any(axis=1).all():
        raise LengthError("each caption needs at least one non-pad token")
    if t_len > params.config.t_max:
        raise LengthError(
            f"caption length {t_len} exceeds t_max {params.config.t_max}")

    dtype = params.embed.dtype
    emb = T.embedding_lookup(params.embed, ids)               # (B, T, M)
    cols = T.tanh(T.add(T.matmul(emb, params.word_w), params.word_b))
    mask = (ids != 0).astype(dtype)[..., None]                # (B, T, 1)
    cols = T.mul(cols, Tensor(mask))
    e_mat = T.transpose(cols, (0, 2, 1))                      # (B, M, T)

    counts = mask.sum(axis=1)                                 # (B, 1)
    pooled = T.div(T.sum_(cols, axis=1), Tensor(counts))      # (B, M)
    s = T.tanh(T.add(T.matmul(pooled, params.sent_w), params.sent_b))
    return e_mat, s
