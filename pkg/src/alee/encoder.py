"""Token encoder: embeddings plus a small transformer.

B(S) below means the encoded token matrix of sentence S. Token and
position embeddings each take half of d_h and are concatenated, then
`layers` post-norm transformer blocks (self-attention, residual, layer
norm, feed-forward, residual, layer norm) run over the batch with a
padding mask.

Alternate encoders register in ENCODERS under a provider name and must
expose params() / encode(ids, mask) / d_h.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .config import EncoderConfig
from .corpus import Sentence

PAD, UNK = 0, 1


class Vocab:
    """Token-to-id map; id 0 pads, id 1 covers unseen tokens."""

    def __init__(self, words: list[str]):
        self.words = ["<pad>", "<unk>"] + sorted(set(words) - {"<pad>", "<unk>"})
        self._idx = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def from_sentences(cls, sentences: list[Sentence]) -> "Vocab":
        return cls([t for s in sentences for t in s.tokens])

    @classmethod
    def from_words(cls, words: list[str]) -> "Vocab":
        """Rebuild from a saved word list, preserving ids exactly."""
        v = cls.__new__(cls)
        v.words = list(words)
        v._idx = {w: i for i, w in enumerate(v.words)}
        return v

    def __len__(self) -> int:
        return len(self.words)

    def encode(self, tokens: list[str]) -> np.ndarray:
        return np.array([self._idx.get(t, UNK) for t in tokens], dtype=np.int64)


class _Block:
    def __init__(self, rng, d: int, heads: int, ffn_mult: int, name: str):
        self.heads = heads
        self.wq = ag.Linear(rng, d, d, f"{name}.wq")
        self.wk = ag.Linear(rng, d, d, f"{name}.wk")
        self.wv = ag.Linear(rng, d, d, f"{name}.wv")
        self.wo = ag.Linear(rng, d, d, f"{name}.wo")
        self.ffn1 = ag.Linear(rng, d, ffn_mult * d, f"{name}.ffn1")
        self.ffn2 = ag.Linear(rng, ffn_mult * d, d, f"{name}.ffn2")
        self.ln1_g = ag.parameter(np.ones(d))
        self.ln1_b = ag.parameter(np.zeros(d))
        self.ln2_g = ag.parameter(np.ones(d))
        self.ln2_b = ag.parameter(np.zeros(d))
        self.name = name

    def __call__(self, x: ag.Tensor, mask: np.ndarray) -> ag.Tensor:
        att = ag.attention(self.wq(x), self.wk(x), self.wv(x),
                           heads=self.heads, mask=mask)
        x = ag.layer_norm(x + self.wo(att), self.ln1_g, self.ln1_b)
        ffn = self.ffn2(ag.relu(self.ffn1(x)))
        return ag.layer_norm(x + ffn, self.ln2_g, self.ln2_b)

    def params(self) -> dict[str, ag.Tensor]:
        out = {}
        for lin in (self.wq, self.wk, self.wv, self.wo, self.ffn1, self.ffn2):
            out.update(lin.params())
        out[f"{self.name}.ln1_g"] = self.ln1_g
        out[f"{self.name}.ln1_b"] = self.ln1_b
        out[f"{self.name}.ln2_g"] = self.ln2_g
        out[f"{self.name}.ln2_b"] = self.ln2_b
        return out


class TransformerEncoder:
    def __init__(self, cfg: EncoderConfig, vocab_size: int,
                 rng: np.random.Generator):
        if cfg.d_h % 2:
            raise ValueError("d_h must be even (token/position halves)")
        if cfg.d_h % cfg.heads:
            raise ValueError("d_h must be divisible by heads")
        self.cfg = cfg
        self.d_h = cfg.d_h
        half = cfg.d_h // 2
        self.tok_emb = ag.parameter(0.1 * rng.standard_normal((vocab_size, half)))
        self.pos_emb = ag.parameter(0.1 * rng.standard_normal((cfg.max_len, half)))
        self.blocks = [_Block(rng, cfg.d_h, cfg.heads, cfg.ffn_mult, f"block{i}")
                       for i in range(cfg.layers)]

    def params(self) -> dict[str, ag.Tensor]:
        out = {"tok_emb": self.tok_emb, "pos_emb": self.pos_emb}
        for b in self.blocks:
            out.update(b.params())
        return out

    def encode(self, ids: np.ndarray, mask: np.ndarray) -> ag.Tensor:
        """ids, mask: (B, n) with n <= max_len; returns (B, n, d_h)."""
        bsz, n = ids.shape
        if n > self.cfg.max_len:
            raise ValueError(f"sequence length {n} exceeds max_len "
                             f"{self.cfg.max_len}")
        tok = ag.take_rows(self.tok_emb, ids.ravel()).reshape(bsz, n, -1)
        pos = ag.take_rows(self.pos_emb, np.tile(np.arange(n), bsz))
        pos = pos.reshape(bsz, n, -1)
        x = ag.concat([tok, pos], axis=2)
        for block in self.blocks:
            x = block(x, mask)
        return x


ENCODERS = {"transformer": TransformerEncoder}


def build_encoder(cfg: EncoderConfig, vocab_size: int,
                  rng: np.random.Generator):
    if cfg.provider not in ENCODERS:
        raise ValueError(f"unknown encoder provider {cfg.provider!r}; "
                         f"available: {sorted(ENCODERS)}")
    return ENCODERS[cfg.provider](cfg, vocab_size, rng)


def pad_batch(vocab: Vocab, sentences: list[Sentence]) -> tuple[np.ndarray, np.ndarray]:
    """Encode and right-pad a batch; returns (ids, mask)."""
    if not sentences:
        raise ValueError("empty batch")
    n = max(s.n for s in sentences)
    ids = np.zeros((len(sentences), n), dtype=np.int64)
    mask = np.zeros((len(sentences), n), dtype=np.float64)
    for i, s in enumerate(sentences):
        row = vocab.encode(s.tokens)
        ids[i, :s.n] = row
        mask[i, :s.n] = 1.0
    return ids, mask
