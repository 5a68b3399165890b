"""Acquisition strategies over the unlabeled pool.

Every strategy returns a SelectionPlan and never mutates the pool; the
caller commits the plan and reshuffles. Sentence "ids" are indices
into pool.sentences, and score ties always break toward the lowest id.

The batch-based strategy walks the unlabeled pool in its current
shuffled order, splits it into one batch per requested sample, picks
the per-batch importance argmax, and feeds each pick to the memory
before scoring the next batch. Importance of a sentence is the mean of
its m largest balanced losses (m=None averages all of them).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import kernels
from .corpus import PoolState
from .mblp import Pack, split_by_sentence


@dataclass
class SelectionPlan:
    selected: list[int]
    scores: dict[int, float] = field(default_factory=dict)
    n_scored: int = 0
    n_smm_updates: int = 0
    batches: list[list[int]] | None = None


def balanced(losses: np.ndarray, k: int, n_types: int, n_bio: int) -> np.ndarray:
    """Divide each cross-entropy by log of its category count.

    `losses` is a canonical per-prediction vector: k trigger entries
    then k*n argument entries.
    """
    out = np.asarray(losses, dtype=np.float64).copy()
    out[:k] /= math.log(n_types)
    out[k:] /= math.log(n_bio)
    return out


def importance(bal_losses: np.ndarray, m: int | None) -> float:
    """Mean of the m largest entries (descending-sort order)."""
    x = np.asarray(bal_losses, dtype=np.float64)
    if x.size == 0:
        return 0.0
    if m is not None and m < 1:
        raise ValueError("m must be at least 1")
    desc = np.sort(x)[::-1]
    if m is not None:
        desc = desc[:m]
    return float(np.mean(desc))


def partition_batches(ids: list[int], n_batches: int) -> list[list[int]]:
    """Split ids (kept in order) into n_batches contiguous chunks.

    Chunk sizes differ by at most one; the remainder goes one-per-batch
    from the front.
    """
    if n_batches < 1 or n_batches > len(ids):
        raise ValueError(f"cannot split {len(ids)} ids into {n_batches} batches")
    base, rem = divmod(len(ids), n_batches)
    out, off = [], 0
    for b in range(n_batches):
        size = base + (1 if b < rem else 0)
        out.append(list(ids[off:off + size]))
        off += size
    return out


def _top_q(ids: list[int], score: dict[int, float], q: int) -> list[int]:
    return sorted(ids, key=lambda i: (-score[i], i))[:q]


def entropy_from_pack(pack: Pack) -> float:
    """Mean normalized entropy over all predictions of one sentence."""
    vals = []
    for p_rows in (pack.p_tr, pack.p_ar):
        if p_rows.shape[0] == 0:
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.where(p_rows > 0, p_rows * np.log(p_rows), 0.0).sum(axis=1)
        vals.append(h / math.log(p_rows.shape[1]))
    if not vals:
        return 0.0
    return float(np.concatenate(vals).mean())


def select_random(pool: PoolState, q: int, rng: np.random.Generator) -> SelectionPlan:
    u = pool.unlabeled
    q = min(q, len(u))
    picks = [int(i) for i in rng.choice(len(u), size=q, replace=False)]
    return SelectionPlan(selected=[u[i] for i in picks], n_scored=0)


def select_uncertainty(pool: PoolState, pack_fn, q: int) -> SelectionPlan:
    ids = sorted(pool.unlabeled)
    q = min(q, len(ids))
    packs, _ = pack_fn([pool.sentences[i] for i in ids])
    scores = {i: entropy_from_pack(p) for i, p in zip(ids, packs)}
    return SelectionPlan(selected=_top_q(ids, scores, q), scores=scores,
                         n_scored=len(ids))


def select_diversity(pool: PoolState, embed_fn, q: int) -> SelectionPlan:
    ids = sorted(pool.unlabeled)
    q = min(q, len(ids))
    x = embed_fn([pool.sentences[i] for i in ids])
    labeled = pool.labeled_sentences()
    if labeled:
        lx = embed_fn(labeled)
        diff = x[:, None, :] - lx[None, :, :]
        d0 = np.sqrt((diff ** 2).sum(axis=2)).min(axis=1)
    else:
        # no labeled anchors: seed from the farthest-from-centroid point
        d0 = np.sqrt(((x - x.mean(axis=0)) ** 2).sum(axis=1))
    picks = kernels.kcenter_greedy(np.ascontiguousarray(x), d0, q)
    return SelectionPlan(selected=[ids[int(i)] for i in picks], n_scored=len(ids))


def select_uncert_diver(pool: PoolState, pack_fn, embed_fn, q: int) -> SelectionPlan:
    """One-shot product of normalized entropy and labeled-set distance."""
    ids = sorted(pool.unlabeled)
    q = min(q, len(ids))
    sents = [pool.sentences[i] for i in ids]
    packs, _ = pack_fn(sents)
    ent = np.array([entropy_from_pack(p) for p in packs])
    labeled = pool.labeled_sentences()
    if labeled:
        x = embed_fn(sents)
        lx = embed_fn(labeled)
        diff = x[:, None, :] - lx[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2)).min(axis=1)
    else:
        dist = np.ones(len(ids))

    def norm(v):
        lo, hi = v.min(), v.max()
        return (v - lo) / (hi - lo) if hi > lo else np.ones_like(v)

    score = norm(ent) * norm(dist)
    scores = {i: float(s) for i, s in zip(ids, score)}
    return SelectionPlan(selected=_top_q(ids, scores, q), scores=scores,
                         n_scored=len(ids))


def _score_chunk(predictor, state, packs: list[Pack],
                 m: int | None) -> list[float]:
    if not packs:
        return []
    with ag.no_grad():
        flat = predictor.predict(state, Pack.concat(packs)).data
    return [importance(v, m) for v in split_by_sentence(flat, packs)]


def select_loss_pred(pool: PoolState, pack_fn, predictor, q: int,
                     m: int | None = None, chunk: int = 128) -> SelectionPlan:
    """Greedy top-q by predicted importance; no memory evolution."""
    ids = sorted(pool.unlabeled)
    q = min(q, len(ids))
    state = predictor.reset()
    scores = {}
    for off in range(0, len(ids), chunk):
        part = ids[off:off + chunk]
        packs, _ = pack_fn([pool.sentences[i] for i in part])
        for i, s in zip(part, _score_chunk(predictor, state, packs, m)):
            scores[i] = s
    return SelectionPlan(selected=_top_q(ids, scores, q), scores=scores,
                         n_scored=len(ids))


def select_mblp(pool: PoolState, pack_fn, predictor, q: int,
                m: int | None = 10,
                n_batches: int | None = None) -> SelectionPlan:
    """Batch-based selection with a memory update after every pick."""
    u = list(pool.unlabeled)
    q = min(q, len(u))
    if q == 0:
        return SelectionPlan(selected=[])
    if n_batches is None:
        n_batches = q
    if n_batches != q:
        raise ValueError(f"need exactly {q} batches to pick {q} samples, "
                         f"got n_batches={n_batches}")
    batches = partition_batches(u, n_batches)
    state = predictor.reset()
    plan = SelectionPlan(selected=[], batches=batches)
    for batch in batches:
        sents = [pool.sentences[i] for i in batch]
        packs, feats = pack_fn(sents)
        vals = _score_chunk(predictor, state, packs, m)
        for i, s in zip(batch, vals):
            plan.scores[i] = s
        plan.n_scored += len(batch)
        best_pos = min(range(len(batch)),
                       key=lambda j: (-vals[j], batch[j]))
        best = batch[best_pos]
        plan.selected.append(best)
        with ag.no_grad():
            state = predictor.update(state, ag.Tensor(feats[best_pos]))
        plan.n_smm_updates += 1
    return plan
