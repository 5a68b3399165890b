"""Joint trigger typing and argument tagging over candidate spans.

For sentence S with encoded tokens B(S) and candidates tr_1..tr_k:

    P_tr(i)   = C_tr(B(S, tr_i))            span-mean features
    c_ij      = Att([B(S,tr_i); B(S,w_j)] W_cq, B(S), B(S))
    P_ar(i,j) = C_ar([B(S,tr_i); B(S,w_j); c_ij])

A sentence yields k trigger predictions followed by k*n argument
predictions in row-major (i, j) order; that flat order is the contract
shared with the loss predictor and selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import kernels
from .corpus import LabelSet, Sentence, TaskSchema


@dataclass
class Prediction:
    """Everything downstream consumers need from one sentence pass."""

    sent: Sentence
    feats: ag.Tensor       # B(S), (n, d_h)
    h_tr: ag.Tensor        # (k, d_h)
    h_ar: ag.Tensor        # (k*n, 3*d_h)
    logits_tr: ag.Tensor   # (k, n_types)
    logits_ar: ag.Tensor   # (k*n, n_bio)

    @property
    def k(self) -> int:
        return self.sent.k

    @property
    def n(self) -> int:
        return self.sent.n

    @property
    def n_preds(self) -> int:
        return self.k + self.k * self.n


class Extractor:
    """Classifier heads and the trigger-token context attention."""

    def __init__(self, rng: np.random.Generator, d_h: int, heads: int,
                 n_types: int, n_bio: int):
        self.d_h = d_h
        self.heads = heads
        self.n_types = n_types
        self.n_bio = n_bio
        self.w_cq = ag.Linear(rng, 2 * d_h, d_h, "w_cq")
        self.c_tr1 = ag.Linear(rng, d_h, d_h, "c_tr1")
        self.c_tr2 = ag.Linear(rng, d_h, n_types, "c_tr2")
        self.c_ar1 = ag.Linear(rng, 3 * d_h, d_h, "c_ar1")
        self.c_ar2 = ag.Linear(rng, d_h, n_bio, "c_ar2")

    def params(self) -> dict[str, ag.Tensor]:
        out = {}
        for lin in (self.w_cq, self.c_tr1, self.c_tr2, self.c_ar1, self.c_ar2):
            out.update(lin.params())
        return out

    def predict(self, feats: ag.Tensor, sent: Sentence) -> Prediction:
        """feats is the unpadded (n, d_h) encoding of `sent`."""
        k, n = sent.k, sent.n
        spans = [(c.start, c.end) for c in sent.candidates]
        h_tr = ag.span_mean(feats, spans)
        logits_tr = self.c_tr2(ag.relu(self.c_tr1(h_tr)))

        rep_i = np.repeat(np.arange(k), n)
        tile_j = np.tile(np.arange(n), k)
        tr_rows = ag.take_rows(h_tr, rep_i)        # (k*n, d_h)
        tok_rows = ag.take_rows(feats, tile_j)     # (k*n, d_h)
        query = self.w_cq(ag.concat([tr_rows, tok_rows], axis=1))
        c_ij = ag.attention(query, feats, feats, heads=self.heads)
        h_ar = ag.concat([tr_rows, tok_rows, c_ij], axis=1)
        logits_ar = self.c_ar2(ag.relu(self.c_ar1(h_ar)))
        return Prediction(sent=sent, feats=feats, h_tr=h_tr, h_ar=h_ar,
                          logits_tr=logits_tr, logits_ar=logits_ar)


def ee_loss(pred: Prediction, labels: LabelSet) -> tuple[ag.Tensor, ag.Tensor]:
    """Cross-entropy for one sentence.

    Returns (summed loss, per-prediction loss vector) with the vector in
    canonical order: k trigger losses then k*n argument losses.
    """
    k, n = pred.k, pred.n
    gold_tr = np.asarray(labels.triggers, dtype=np.int64)
    gold_ar = np.asarray(labels.arguments, dtype=np.int64).reshape(k * n)
    lp_tr = ag.log_softmax(pred.logits_tr)
    lp_ar = ag.log_softmax(pred.logits_ar)
    l_tr = -lp_tr[np.arange(k), gold_tr]
    l_ar = -lp_ar[np.arange(k * n), gold_ar]
    per_pred = ag.concat([l_tr, l_ar], axis=0)
    return per_pred.sum(), per_pred


def ee_loss_batch(preds: list[Prediction],
                  labels: list[LabelSet]) -> tuple[ag.Tensor, list[np.ndarray]]:
    """Batch objective: mean over sentences of the summed cross-entropy.

    Also returns each sentence's per-prediction loss values (detached,
    canonical order) for loss-prediction targets. Equivalent to calling
    ee_loss per sentence, but with one softmax per task.
    """
    tr_parts = [p.logits_tr for p in preds if p.k > 0]
    ar_parts = [p.logits_ar for p in preds if p.k > 0]
    gold_tr = np.concatenate([np.asarray(l.triggers, dtype=np.int64)
                              for l in labels]) if tr_parts else np.zeros(0, np.int64)
    gold_ar = np.concatenate(
        [np.asarray(l.arguments, dtype=np.int64).reshape(-1)
         for l in labels]) if ar_parts else np.zeros(0, np.int64)
    picked_tr = picked_ar = None
    if tr_parts:
        lp = ag.log_softmax(ag.concat(tr_parts, axis=0))
        picked_tr = -lp[np.arange(gold_tr.size), gold_tr]
        lp = ag.log_softmax(ag.concat(ar_parts, axis=0))
        picked_ar = -lp[np.arange(gold_ar.size), gold_ar]
        total = (picked_tr.sum() + picked_ar.sum()) * (1.0 / len(preds))
    else:
        total = ag.Tensor(0.0)
    per_sent, t_off, a_off = [], 0, 0
    for p in preds:
        k, kn = p.k, p.k * p.n
        if k == 0:
            per_sent.append(np.zeros(0))
            continue
        per_sent.append(np.concatenate([
            picked_tr.data[t_off:t_off + k], picked_ar.data[a_off:a_off + kn]]))
        t_off += k
        a_off += kn
    return total, per_sent


def decode(pred: Prediction, schema: TaskSchema) -> LabelSet:
    """Greedy decode: argmax, BIO repair, and all-O rows for NA triggers."""
    with ag.no_grad():
        triggers = pred.logits_tr.data.argmax(axis=1)
        arg = pred.logits_ar.data.argmax(axis=1).reshape(pred.k, pred.n)
    rows = []
    for i in range(pred.k):
        if triggers[i] == 0:
            rows.append([0] * pred.n)
        else:
            rows.append(kernels.repair_bio(arg[i].astype(np.int64)).tolist())
    return LabelSet(triggers=[int(t) for t in triggers], arguments=rows)


def extract_events(labels: LabelSet, sent: Sentence, schema: TaskSchema):
    """Flatten labels into comparable (trigger, argument) tuples.

    Triggers: (start, end, type) for non-NA candidates. Arguments:
    (trig_start, trig_end, span_start, span_end, role) per BIO span.
    """
    trig_set, arg_set = set(), set()
    for c, t, row in zip(sent.candidates, labels.triggers, labels.arguments):
        if t == 0:
            continue
        trig_set.add((c.start, c.end, t))
        spans = kernels.spans_from_bio(np.asarray(row, dtype=np.int64),
                                       schema.n_roles)
        for s, e, r in spans:
            arg_set.add((c.start, c.end, int(s), int(e), int(r)))
    return trig_set, arg_set
