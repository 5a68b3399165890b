"""Model assembly and checkpointing.

A JointModel bundles the encoder (prefix "enc."), the extractor
("ext.") and optionally a loss predictor ("mblp."), with one SGD
optimizer for encoder+extractor and a separate one for the predictor.
Checkpoints are npz archives with a JSON header array carrying format
version, config, schema, vocab, and predictor kind.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import autograd as ag
from .config import Config
from .corpus import LabelSet, Sentence, TaskSchema
from .encoder import Vocab, build_encoder, pad_batch
from .extractor import Extractor, decode
from .mblp import NoMemoryPredictor, Pack, SmmNetwork

CHECKPOINT_VERSION = 1


class JointModel:
    def __init__(self, cfg: Config, schema: TaskSchema, vocab: Vocab,
                 seed: int = 0, predictor_kind: str | None = None):
        if predictor_kind not in (None, "smm", "nomem"):
            raise ValueError(f"unknown predictor kind {predictor_kind!r}")
        self.cfg = cfg
        self.schema = schema
        self.vocab = vocab
        self.predictor_kind = predictor_kind
        rng = np.random.default_rng(seed)
        enc = cfg.encoder
        self.encoder = build_encoder(enc, len(vocab), rng)
        self.extractor = Extractor(rng, enc.d_h, enc.heads,
                                   schema.n_types, schema.n_bio)
        if predictor_kind == "smm":
            mb = cfg.mblp
            self.predictor = SmmNetwork(rng, enc.d_h, schema.n_types,
                                        schema.n_bio, d_m=mb.d_m,
                                        heads=mb.heads, slots=mb.slots,
                                        hidden=mb.hidden)
        elif predictor_kind == "nomem":
            self.predictor = NoMemoryPredictor(rng, enc.d_h, schema.n_types,
                                               schema.n_bio,
                                               hidden=cfg.mblp.hidden)
        else:
            self.predictor = None
        self.opt_ee = ag.SGD(self.ee_params(), cfg.train.lr,
                             clip_norm=cfg.train.clip_norm)
        self.opt_m = (ag.SGD(self.mblp_params(), cfg.train.mblp_lr,
                             clip_norm=cfg.train.clip_norm)
                      if self.predictor else None)

    # -- parameter groups -----------------------------------------------
    def encoder_params(self) -> dict[str, ag.Tensor]:
        return {f"enc.{k}": v for k, v in self.encoder.params().items()}

    def extractor_params(self) -> dict[str, ag.Tensor]:
        return {f"ext.{k}": v for k, v in self.extractor.params().items()}

    def ee_params(self) -> dict[str, ag.Tensor]:
        return {**self.encoder_params(), **self.extractor_params()}

    def mblp_params(self) -> dict[str, ag.Tensor]:
        if self.predictor is None:
            return {}
        return {f"mblp.{k}": v for k, v in self.predictor.params().items()}

    def all_params(self) -> dict[str, ag.Tensor]:
        return {**self.ee_params(), **self.mblp_params()}

    # -- forward helpers --------------------------------------------------
    def encode_sentences(self, sents: list[Sentence]) -> list[ag.Tensor]:
        ids, mask = pad_batch(self.vocab, sents)
        out = self.encoder.encode(ids, mask)
        return [out[i, :s.n] for i, s in enumerate(sents)]

    def packs(self, sents: list[Sentence],
              chunk: int = 256) -> tuple[list[Pack], list[np.ndarray]]:
        """Detached prediction packs plus raw features, for scoring."""
        out_p, out_f = [], []
        for off in range(0, len(sents), chunk):
            part = sents[off:off + chunk]
            with ag.no_grad():
                feats = self.encode_sentences(part)
                for f, s in zip(feats, part):
                    out_p.append(Pack.from_prediction(
                        self.extractor.predict(f, s)))
                    out_f.append(f.data)
        return out_p, out_f

    def embed(self, sents: list[Sentence], chunk: int = 256) -> np.ndarray:
        """Mean-pooled sentence encodings, (len(sents), d_h)."""
        rows = []
        for off in range(0, len(sents), chunk):
            part = sents[off:off + chunk]
            with ag.no_grad():
                for f in self.encode_sentences(part):
                    rows.append(f.data.mean(axis=0))
        return np.stack(rows)

    def predict_labels(self, sents: list[Sentence],
                       chunk: int = 256) -> list[LabelSet]:
        out = []
        for off in range(0, len(sents), chunk):
            part = sents[off:off + chunk]
            with ag.no_grad():
                feats = self.encode_sentences(part)
                for f, s in zip(feats, part):
                    out.append(decode(self.extractor.predict(f, s),
                                      self.schema))
        return out

    # -- persistence --------------------------------------------------------
    def save(self, path: str | Path):
        header = {
            "version": CHECKPOINT_VERSION,
            "config": self.cfg.to_dict(),
            "schema": {"event_types": self.schema.event_types,
                       "roles": self.schema.roles},
            "vocab": self.vocab.words,
            "predictor_kind": self.predictor_kind,
        }
        arrays = {k: v.data for k, v in self.all_params().items()}
        blob = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
        np.savez(path, __header__=blob, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "JointModel":
        with np.load(path) as z:
            header = json.loads(bytes(z["__header__"].tobytes()))
            if header.get("version") != CHECKPOINT_VERSION:
                raise ValueError(
                    f"checkpoint version {header.get('version')!r} not "
                    f"supported (expected {CHECKPOINT_VERSION})")
            cfg = Config.from_dict(header["config"])
            schema = TaskSchema(**header["schema"])
            vocab = Vocab.from_words(header["vocab"])
            model = cls(cfg, schema, vocab,
                        predictor_kind=header["predictor_kind"])
            params = model.all_params()
            for k, p in params.items():
                if k not in z:
                    raise ValueError(f"checkpoint missing parameter {k}")
                arr = z[k]
                if arr.shape != p.data.shape:
                    raise ValueError(f"shape mismatch for {k}: "
                                     f"{arr.shape} vs {p.data.shape}")
                p.data = arr.astype(np.float64)
        return model
