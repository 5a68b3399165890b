"""Experiment loop: pool rounds, evaluation, and result files.

A run writes three artifacts under its output directory:

  curve.csv     round,labeled,trigger_f1,argument_f1,seed
  log.jsonl     one record per training step
  summary.json  config echo, curve, counters, labels-to-target

ALEE_THREADS > 1 fans independent runs out over processes.
"""

from __future__ import annotations

import dataclasses
import json
import multiprocessing
import os
from pathlib import Path

import numpy as np

from .config import Config
from .corpus import Oracle, PoolState, Sentence, TaskSchema, commit_round, split_pool
from .encoder import Vocab
from .extractor import extract_events
from .model import JointModel
from .selection import (select_diversity, select_loss_pred, select_mblp,
                        select_random, select_uncert_diver, select_uncertainty)
from .trainer import train_round

# aliases: ablation names resolve onto the two predictor-based selectors
STRATEGIES = {
    "random": (None, None),
    "uncertainty": (None, None),
    "diversity": (None, None),
    "uncert_diver": (None, None),
    "loss_pred": ("nomem", "mean"),   # mean over all predicted losses
    "lp_mean": ("nomem", "mean"),
    "lp_ie": ("nomem", "top_m"),
    "mblp": ("smm", "top_m"),
    "full": ("smm", "top_m"),
    "mblp_batch": ("smm", "mean"),    # m = all predictions
}

PUBLIC_STRATEGIES = ("mblp", "random", "uncertainty", "diversity",
                     "uncert_diver", "loss_pred")


def f1_eval(model: JointModel, sents: list[Sentence],
            schema: TaskSchema) -> dict:
    """Micro-averaged trigger and argument F1 over a labeled set."""
    preds = model.predict_labels(sents)
    counts = {"tr": [0, 0, 0], "ar": [0, 0, 0]}  # tp, n_pred, n_gold
    for s, plab in zip(sents, preds):
        pt, pa = extract_events(plab, s, schema)
        gt, ga = extract_events(s.labels, s, schema)
        for key, p, g in (("tr", pt, gt), ("ar", pa, ga)):
            counts[key][0] += len(p & g)
            counts[key][1] += len(p)
            counts[key][2] += len(g)

    def prf(tp, npred, ngold):
        p = tp / npred if npred else 0.0
        r = tp / ngold if ngold else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return p, r, f

    p_t, r_t, f_t = prf(*counts["tr"])
    p_a, r_a, f_a = prf(*counts["ar"])
    return {"trigger_p": p_t, "trigger_r": r_t, "trigger_f1": f_t,
            "argument_p": p_a, "argument_r": r_a, "argument_f1": f_a}


def run_selection(strategy: str, model: JointModel, pool: PoolState,
                  q: int, m: int | None, rng: np.random.Generator):
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    kind, mode = STRATEGIES[strategy]
    if strategy == "random":
        return select_random(pool, q, rng)
    if strategy == "uncertainty":
        return select_uncertainty(pool, model.packs, q)
    if strategy == "diversity":
        return select_diversity(pool, model.embed, q)
    if strategy == "uncert_diver":
        return select_uncert_diver(pool, model.packs, model.embed, q)
    eff_m = None if mode == "mean" else m
    if kind == "nomem":
        return select_loss_pred(pool, model.packs, model.predictor, q, m=eff_m)
    return select_mblp(pool, model.packs, model.predictor, q, m=eff_m)


def labels_to_target(curve: list[dict], target: float) -> int | None:
    """Smallest labeled count whose trigger F1 reaches the target."""
    for row in curve:
        if row["trigger_f1"] >= target:
            return row["labeled"]
    return None


def run_experiment(cfg: Config, schema: TaskSchema,
                   train_sents: list[Sentence], eval_sents: list[Sentence],
                   strategy: str, seed: int,
                   out_dir: str | Path | None = None) -> dict:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    kind, _ = STRATEGIES[strategy]
    rng = np.random.default_rng(seed)
    pool = split_pool(train_sents, cfg.experiment.initial, rng)
    oracle = Oracle(train_sents)
    vocab = Vocab.from_sentences(pool.sentences)
    model = JointModel(cfg, schema, vocab, seed=seed, predictor_kind=kind)

    out = Path(out_dir) if out_dir else None
    log_f = None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        log_f = open(out / "log.jsonl", "w")

    def log_fn(rec):
        if log_f:
            log_f.write(json.dumps(rec) + "\n")

    curve, counters = [], []
    q, m = cfg.select.query_size, cfg.select.m
    try:
        for rnd in range(cfg.experiment.rounds + 1):
            train_round(model, pool.labeled_sentences(), cfg, rng,
                        round_idx=rnd, log_fn=log_fn)
            scores = f1_eval(model, eval_sents, schema)
            curve.append({"round": rnd, "labeled": len(pool.labeled),
                          "trigger_f1": scores["trigger_f1"],
                          "argument_f1": scores["argument_f1"]})
            if rnd == cfg.experiment.rounds or not pool.unlabeled:
                break
            plan = run_selection(strategy, model, pool, q, m, rng)
            counters.append({"round": rnd, "n_scored": plan.n_scored,
                             "n_smm_updates": plan.n_smm_updates})
            commit_round(pool, plan.selected, oracle, rng)
    finally:
        if log_f:
            log_f.close()

    summary = {
        "strategy": strategy, "seed": seed, "m": m, "query_size": q,
        "pool_size": len(train_sents), "initial": cfg.experiment.initial,
        "target_f1": cfg.experiment.target_f1,
        "labels_to_target": labels_to_target(curve, cfg.experiment.target_f1),
        "curve": curve, "selection_counters": counters,
        "config": cfg.to_dict(),
    }
    if out:
        with open(out / "curve.csv", "w") as f:
            f.write("round,labeled,trigger_f1,argument_f1,seed\n")
            for row in curve:
                f.write(f"{row['round']},{row['labeled']},"
                        f"{row['trigger_f1']:.6f},{row['argument_f1']:.6f},"
                        f"{seed}\n")
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def _worker(args):
    cfg_dict, schema_dict, train_sents, eval_sents, strategy, seed, out = args
    cfg = Config.from_dict(cfg_dict)
    schema = TaskSchema(**schema_dict)
    return run_experiment(cfg, schema, train_sents, eval_sents, strategy,
                          seed, out)


def run_many(cfg: Config, schema: TaskSchema, train_sents, eval_sents,
             jobs: list[tuple[str, int]],
             out_root: str | Path | None = None) -> list[dict]:
    """Run (strategy, seed) jobs, fanning out if ALEE_THREADS allows."""
    tasks = []
    for strategy, seed in jobs:
        cfg_d = cfg.to_dict()
        if STRATEGIES[strategy][1] == "mean":
            cfg_d["select"]["m"] = None
        out = (str(Path(out_root) / f"{strategy}_seed{seed}")
               if out_root else None)
        tasks.append((cfg_d, {"event_types": schema.event_types,
                              "roles": schema.roles},
                      train_sents, eval_sents, strategy, seed, out))
    n_threads = int(os.environ.get("ALEE_THREADS", "1"))
    if n_threads > 1 and len(tasks) > 1:
        with multiprocessing.Pool(min(n_threads, len(tasks))) as p:
            return p.map(_worker, tasks)
    return [_worker(t) for t in tasks]


def ablation_suite(cfg: Config, schema: TaskSchema, train_sents, eval_sents,
                   seeds: list[int],
                   out_dir: str | Path | None = None) -> dict:
    """Full method vs its two ablations, compared at 20% labeled."""
    variants = ("full", "mblp_batch", "lp_ie")
    jobs = [(v, s) for v in variants for s in seeds]
    results = run_many(cfg, schema, train_sents, eval_sents, jobs,
                       out_root=out_dir)
    cut = 0.2 * len(train_sents)
    report = {"variants": {}, "labeled_cut": cut, "seeds": list(seeds)}
    for v in variants:
        rows = [r for r in results if r["strategy"] == v]
        f1s = []
        for r in rows:
            at = [c["trigger_f1"] for c in r["curve"] if c["labeled"] >= cut]
            f1s.append(at[0] if at else r["curve"][-1]["trigger_f1"])
        report["variants"][v] = {"trigger_f1_at_cut": f1s,
                                 "mean": float(np.mean(f1s))}
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "ablation.json").write_text(
            json.dumps(report, indent=2))
    return report


def sweep_m(cfg: Config, schema: TaskSchema, train_sents, eval_sents,
            ms: list[int | None], seeds: list[int],
            out_dir: str | Path | None = None) -> dict:
    """Labels-to-target for each m; None stands for all predictions."""
    report = {"target_f1": cfg.experiment.target_f1, "per_m": {}}
    for m in ms:
        c = Config.from_dict(cfg.to_dict())
        c.select.m = m
        strategy = "mblp_batch" if m is None else "mblp"
        sub = (str(Path(out_dir) / f"m_{m if m is not None else 'inf'}")
               if out_dir else None)
        results = run_many(c, schema, train_sents, eval_sents,
                           [(strategy, s) for s in seeds], out_root=sub)
        needed = [r["labels_to_target"] for r in results]
        # a run that never reaches the target counts as the full pool
        vals = [n if n is not None else len(train_sents) for n in needed]
        key = "inf" if m is None else str(m)
        report["per_m"][key] = {"labels_to_target": needed,
                                "mean": float(np.mean(vals))}
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "sweep_m.json").write_text(json.dumps(report, indent=2))
    return report
