import math

import numpy as np
import pytest

from alee.corpus import LabelSet, PoolState, Sentence, TriggerCandidate
from alee.mblp import Pack
from alee.selection import (SelectionPlan, balanced, entropy_from_pack,
                            importance, partition_batches, select_diversity,
                            select_loss_pred, select_mblp, select_random,
                            select_uncert_diver, select_uncertainty)


def naive_importance(vals, m):
    if len(vals) == 0:
        return 0.0
    desc = sorted(vals, reverse=True)
    if m is not None:
        desc = desc[:m]
    return float(np.mean(desc))


def test_balanced_segments():
    losses = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    out = balanced(losses, k=2, n_types=4, n_bio=9)
    assert np.allclose(out[:2], losses[:2] / math.log(4))
    assert np.allclose(out[2:], losses[2:] / math.log(9))
    assert losses[0] == 1.0  # input untouched


def test_balanced_uniform_ce_is_one():
    for k_cat in (3, 7, 11):
        ce = math.log(k_cat)  # cross-entropy of the uniform distribution
        out = balanced(np.array([ce]), k=1, n_types=k_cat, n_bio=5)
        assert abs(out[0] - 1.0) < 1e-12


def test_importance_matches_naive_exactly():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(0, 30))
        vals = rng.random(n) * 5
        for m in (1, 2, 5, None, n + 3):
            if n == 0 and m is None:
                continue
            assert importance(vals, m) == naive_importance(vals, m)


def test_importance_empty_and_validation():
    assert importance(np.zeros(0), 5) == 0.0
    with pytest.raises(ValueError):
        importance(np.ones(3), 0)


def test_partition_batches_near_equal():
    out = partition_batches(list(range(7)), 3)
    assert [len(b) for b in out] == [3, 2, 2]
    assert [i for b in out for i in b] == list(range(7))
    assert partition_batches([1, 2], 2) == [[1], [2]]
    with pytest.raises(ValueError):
        partition_batches([1, 2], 3)
    with pytest.raises(ValueError):
        partition_batches([1, 2], 0)


def blank_sent(i):
    return Sentence(id=f"s{i}", tokens=["w"],
                    candidates=[TriggerCandidate(0, 1, "noun")],
                    labels=LabelSet(triggers=[0], arguments=[[0]]))


def make_pool(n, n_labeled=0):
    sents = [blank_sent(i) for i in range(n)]
    labeled = list(range(n_labeled))
    unlabeled = list(range(n_labeled, n))
    return PoolState(sentences=sents, labeled=labeled, unlabeled=unlabeled)


class StubPredictor:
    """predict() echoes the first column of h_tr; update counts calls."""

    def __init__(self):
        self.updates = 0

    def reset(self):
        from alee.mblp import MemoryState
        return MemoryState(mem={})

    def update(self, state, feats):
        self.updates += 1
        return state

    def predict(self, state, pack):
        from alee import autograd as ag
        return ag.Tensor(pack.h_tr[:, 0])


def stub_pack_fn(values):
    """Each sentence scores values[sentence.id]."""

    def fn(sents):
        packs = [Pack(h_tr=np.array([[values[s.id]]]),
                      p_tr=np.ones((1, 2)),
                      h_ar=np.zeros((0, 3)), p_ar=np.zeros((0, 3)))
                 for s in sents]
        feats = [np.zeros((1, 4)) for _ in sents]
        return packs, feats

    return fn


def test_select_random_samples_without_replacement():
    pool = make_pool(20)
    plan = select_random(pool, 5, np.random.default_rng(0))
    assert len(plan.selected) == 5
    assert len(set(plan.selected)) == 5
    assert set(plan.selected) <= set(pool.unlabeled)
    again = select_random(make_pool(20), 5, np.random.default_rng(0))
    assert again.selected == plan.selected


def test_select_mblp_counters_and_batches():
    pool = make_pool(70)
    vals = {f"s{i}": float(i % 7) for i in range(70)}
    pred = StubPredictor()
    plan = select_mblp(pool, stub_pack_fn(vals), pred, q=10, m=5)
    assert len(plan.selected) == 10
    assert plan.n_scored == 70
    assert plan.n_smm_updates == 10
    assert pred.updates == 10
    assert [len(b) for b in plan.batches] == [7] * 10
    # every pick is its batch argmax; ties break to the lowest pool id
    for b, pick in zip(plan.batches, plan.selected):
        best = max(vals[f"s{i}"] for i in b)
        contenders = [i for i in b if vals[f"s{i}"] == best]
        assert pick == min(contenders)


def test_select_mblp_scale_invariance():
    pool = make_pool(40)
    rng = np.random.default_rng(1)
    vals = {f"s{i}": float(v) for i, v in enumerate(rng.random(40))}
    a = select_mblp(make_pool(40), stub_pack_fn(vals), StubPredictor(), q=8, m=3)
    scaled = {k: 2.5 * v for k, v in vals.items()}
    b = select_mblp(pool, stub_pack_fn(scaled), StubPredictor(), q=8, m=3)
    assert a.selected == b.selected


def test_select_mblp_batch_count_validation():
    pool = make_pool(30)
    vals = {f"s{i}": 0.0 for i in range(30)}
    with pytest.raises(ValueError, match="batches"):
        select_mblp(pool, stub_pack_fn(vals), StubPredictor(), q=10,
                    n_batches=5)
    plan = select_mblp(pool, stub_pack_fn(vals), StubPredictor(), q=10,
                       n_batches=10)
    assert len(plan.selected) == 10


def test_select_mblp_exhausts_small_pool():
    pool = make_pool(4)
    vals = {f"s{i}": float(i) for i in range(4)}
    plan = select_mblp(pool, stub_pack_fn(vals), StubPredictor(), q=10, m=2)
    assert sorted(plan.selected) == pool.unlabeled or \
        sorted(plan.selected) == sorted(pool.unlabeled)
    assert len(plan.selected) == 4


def test_select_loss_pred_top_q_ties_to_lowest_id():
    pool = make_pool(12)
    vals = {f"s{i}": (3.0 if i in (4, 7, 9) else 1.0) for i in range(12)}
    plan = select_loss_pred(pool, stub_pack_fn(vals), StubPredictor(), q=4)
    assert plan.selected == [4, 7, 9, 0]
    assert plan.n_scored == 12
    assert plan.n_smm_updates == 0


def test_entropy_from_pack_prefers_uniform():
    flat = Pack(h_tr=np.zeros((1, 2)), p_tr=np.full((1, 4), 0.25),
                h_ar=np.zeros((0, 3)), p_ar=np.zeros((0, 4)))
    peaked = Pack(h_tr=np.zeros((1, 2)),
                  p_tr=np.array([[0.97, 0.01, 0.01, 0.01]]),
                  h_ar=np.zeros((0, 3)), p_ar=np.zeros((0, 4)))
    assert abs(entropy_from_pack(flat) - 1.0) < 1e-12
    assert entropy_from_pack(peaked) < 0.3
    empty = Pack(h_tr=np.zeros((0, 2)), p_tr=np.zeros((0, 4)),
                 h_ar=np.zeros((0, 3)), p_ar=np.zeros((0, 4)))
    assert entropy_from_pack(empty) == 0.0


def test_select_uncertainty_ranks_by_entropy():
    pool = make_pool(6)

    def pack_fn(sents):
        packs = []
        for s in sents:
            i = int(s.id[1:])
            p = np.full(4, 0.25) if i in (2, 5) else \
                np.array([0.9, 0.05, 0.03, 0.02])
            packs.append(Pack(h_tr=np.zeros((1, 2)), p_tr=p[None, :],
                              h_ar=np.zeros((0, 3)), p_ar=np.zeros((0, 4))))
        return packs, [np.zeros((1, 4))] * len(sents)

    plan = select_uncertainty(pool, pack_fn, q=2)
    assert plan.selected == [2, 5]


def test_select_diversity_spreads_picks():
    pool = make_pool(5, n_labeled=1)  # sentence 0 labeled
    coords = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0],
                       [0.0, 6.0], [0.2, 0.1]])

    def embed_fn(sents):
        return np.stack([coords[int(s.id[1:])] for s in sents])

    plan = select_diversity(pool, embed_fn, q=2)
    assert set(plan.selected) == {2, 3}


def test_select_diversity_empty_labeled_seeds_from_centroid():
    pool = make_pool(4)
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [10.0, 10.0]])

    def embed_fn(sents):
        return np.stack([coords[int(s.id[1:])] for s in sents])

    plan = select_diversity(pool, embed_fn, q=1)
    assert plan.selected == [3]  # farthest from the pool centroid


def test_select_uncert_diver_unlabeled_distance_factor():
    """With nothing labeled the distance factor is flat."""
    pool = make_pool(5)
    ent_vals = [0.1, 0.9, 0.5, 0.7, 0.2]

    def pack_fn(sents):
        packs = []
        for s in sents:
            e = ent_vals[int(s.id[1:])]
            p = np.array([e, 1 - e])  # entropy monotone in e for e<0.5... craft directly
            packs.append(Pack(h_tr=np.zeros((1, 2)),
                              p_tr=np.array([[0.5 + (1 - e) / 2,
                                              0.5 - (1 - e) / 2]]),
                              h_ar=np.zeros((0, 3)), p_ar=np.zeros((0, 4))))
        return packs, [np.zeros((1, 4))] * len(sents)

    def embed_fn(sents):
        return np.zeros((len(sents), 3))

    plan = select_uncert_diver(pool, pack_fn, embed_fn, q=2)
    assert plan.selected == [1, 3]  # two most uncertain
