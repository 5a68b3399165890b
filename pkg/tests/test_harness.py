"""Experiment harness: evaluation, dispatch, and end-to-end runs."""

import json
import os

import numpy as np
import pytest

from alee.config import Config
from alee.corpus import split_pool
from alee.encoder import Vocab
from alee.extractor import extract_events
from alee.harness import (PUBLIC_STRATEGIES, STRATEGIES, ablation_suite,
                          f1_eval, labels_to_target, run_experiment,
                          run_many, run_selection, sweep_m)
from alee.model import JointModel
from alee.synth import SynthSpec, generate


def tiny_config(**kw):
    cfg = Config()
    cfg.encoder.d_h = 16
    cfg.encoder.layers = 1
    cfg.encoder.heads = 2
    cfg.mblp.d_m = 16
    cfg.mblp.slots = 2
    cfg.mblp.hidden = 8
    cfg.train.epochs = 2
    cfg.train.batch_size = 16
    cfg.experiment.rounds = 2
    cfg.experiment.initial = 10
    cfg.select.query_size = 10
    cfg.select.m = 3
    for k, v in kw.items():
        section, key = k.split("__")
        setattr(getattr(cfg, section), key, v)
    return cfg


@pytest.fixture(scope="module")
def corpus():
    schema, sents = generate(SynthSpec(n=60, n_types=4, n_roles=3, seed=7))
    return schema, sents


@pytest.fixture(scope="module")
def small_model(corpus):
    schema, sents = corpus
    cfg = tiny_config()
    vocab = Vocab.from_sentences(sents)
    return cfg, JointModel(cfg, schema, vocab, seed=0, predictor_kind="smm")


def naive_f1(model, sents, schema):
    # independent counting: multisets of event tuples per sentence
    preds = model.predict_labels(sents)
    tp = {"tr": 0, "ar": 0}
    np_ = {"tr": 0, "ar": 0}
    ng = {"tr": 0, "ar": 0}
    for s, plab in zip(sents, preds):
        pt, pa = extract_events(plab, s, schema)
        gt, ga = extract_events(s.labels, s, schema)
        for key, p, g in (("tr", pt, gt), ("ar", pa, ga)):
            np_[key] += len(p)
            ng[key] += len(g)
            g_left = list(g)
            for item in p:
                if item in g_left:
                    g_left.remove(item)
                    tp[key] += 1
    out = {}
    for key, name in (("tr", "trigger"), ("ar", "argument")):
        p = tp[key] / np_[key] if np_[key] else 0.0
        r = tp[key] / ng[key] if ng[key] else 0.0
        out[f"{name}_f1"] = 2 * p * r / (p + r) if p + r else 0.0
    return out


def test_f1_eval_matches_naive(corpus, small_model):
    schema, sents = corpus
    _, model = small_model
    got = f1_eval(model, sents[:25], schema)
    want = naive_f1(model, sents[:25], schema)
    assert got["trigger_f1"] == pytest.approx(want["trigger_f1"], abs=1e-12)
    assert got["argument_f1"] == pytest.approx(want["argument_f1"], abs=1e-12)


def test_f1_eval_perfect_predictions(corpus, small_model):
    schema, sents = corpus

    class Echo:
        def predict_labels(self, ss):
            return [s.labels for s in ss]

    scores = f1_eval(Echo(), sents[:10], schema)
    assert scores["trigger_f1"] == pytest.approx(1.0)
    assert scores["argument_f1"] == pytest.approx(1.0)


def test_labels_to_target():
    curve = [{"labeled": 50, "trigger_f1": 0.4},
             {"labeled": 100, "trigger_f1": 0.82},
             {"labeled": 150, "trigger_f1": 0.79}]
    assert labels_to_target(curve, 0.80) == 100
    assert labels_to_target(curve, 0.90) is None
    assert labels_to_target([], 0.5) is None


def test_run_selection_all_strategies(corpus, small_model):
    schema, sents = corpus
    cfg, model = small_model
    for strategy in PUBLIC_STRATEGIES + ("lp_mean", "lp_ie", "full",
                                         "mblp_batch"):
        kind, _ = STRATEGIES[strategy]
        m = model
        if kind != "smm":
            vocab = Vocab.from_sentences(sents)
            m = JointModel(cfg, schema, vocab, seed=0, predictor_kind=kind)
        rng = np.random.default_rng(3)
        pool = split_pool(sents, 10, rng)
        plan = run_selection(strategy, m, pool, 5, cfg.select.m, rng)
        assert len(plan.selected) == 5
        assert set(plan.selected) <= set(pool.unlabeled)

    with pytest.raises(ValueError):
        run_selection("nope", model, pool, 5, 3, rng)


def test_run_experiment_end_to_end(corpus, tmp_path):
    schema, sents = corpus
    cfg = tiny_config(train__epochs=1, experiment__rounds=2)
    out = tmp_path / "exp"
    summary = run_experiment(cfg, schema, sents[:40], sents[40:],
                             "mblp", seed=0, out_dir=out)

    assert len(summary["curve"]) == 3
    assert [c["labeled"] for c in summary["curve"]] == [10, 20, 30]
    # every unlabeled sentence scored, every pick written to memory
    assert summary["selection_counters"][0]["n_scored"] == 30
    assert summary["selection_counters"][0]["n_smm_updates"] == 10
    assert summary["selection_counters"][1]["n_scored"] == 20

    lines = (out / "curve.csv").read_text().strip().split("\n")
    assert lines[0] == "round,labeled,trigger_f1,argument_f1,seed"
    assert len(lines) == 4
    disk = json.loads((out / "summary.json").read_text())
    assert disk["strategy"] == "mblp"
    assert disk["curve"] == summary["curve"]
    logs = [json.loads(l) for l in
            (out / "log.jsonl").read_text().strip().split("\n")]
    assert {"round", "epoch", "step", "l_ee", "l_mse"} <= set(logs[0])


def test_run_experiment_random_reproducible(corpus):
    schema, sents = corpus
    cfg = tiny_config(train__epochs=1, experiment__rounds=1)
    a = run_experiment(cfg, schema, sents[:40], sents[40:], "random", seed=5)
    b = run_experiment(cfg, schema, sents[:40], sents[40:], "random", seed=5)
    assert a["curve"] == b["curve"]


def test_run_many_mean_strategies_clear_m(corpus, tmp_path):
    schema, sents = corpus
    cfg = tiny_config(train__epochs=1, experiment__rounds=1)
    results = run_many(cfg, schema, sents[:30], sents[30:45],
                       [("lp_mean", 0), ("lp_ie", 0)], out_root=tmp_path)
    by = {r["strategy"]: r for r in results}
    assert by["lp_mean"]["m"] is None
    assert by["lp_ie"]["m"] == 3


def test_run_many_parallel_env(corpus, monkeypatch):
    schema, sents = corpus
    cfg = tiny_config(train__epochs=1, experiment__rounds=1)
    monkeypatch.setenv("ALEE_THREADS", "2")
    results = run_many(cfg, schema, sents[:30], sents[30:45],
                       [("random", 0), ("random", 1)])
    assert len(results) == 2
    assert {r["seed"] for r in results} == {0, 1}


def test_ablation_suite_report(corpus, tmp_path):
    schema, sents = corpus
    cfg = tiny_config(train__epochs=1, experiment__rounds=1,
                      experiment__initial=8, select__query_size=8)
    report = ablation_suite(cfg, schema, sents[:40], sents[40:],
                            seeds=[0], out_dir=tmp_path)
    assert set(report["variants"]) == {"full", "mblp_batch", "lp_ie"}
    for v in report["variants"].values():
        assert len(v["trigger_f1_at_cut"]) == 1
        assert 0.0 <= v["mean"] <= 1.0
    assert (tmp_path / "ablation.json").exists()


def test_sweep_m_report(corpus, tmp_path):
    schema, sents = corpus
    cfg = tiny_config(train__epochs=1, experiment__rounds=1,
                      experiment__initial=8, select__query_size=8)
    cfg.experiment.target_f1 = 0.0  # reached immediately: shape test only
    report = sweep_m(cfg, schema, sents[:40], sents[40:], ms=[2, None],
                     seeds=[0], out_dir=tmp_path)
    assert set(report["per_m"]) == {"2", "inf"}
    assert report["per_m"]["2"]["labels_to_target"] == [8]
    assert (tmp_path / "sweep_m.json").exists()
