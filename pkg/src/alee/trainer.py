"""Delayed training of the extractor and the loss predictor.

Per epoch the labeled set is shuffled into B batches. At step i:

  1. run the extraction forward pass on b_i and collect true balanced
     losses per prediction;
  2. if loss predictions for b_i were stored at step i-1, score them
     against the fresh true losses with MSE plus internal/external
     ranking hinges and update predictor weights only (the stored
     predictions keep their graph; a version counter asserts the
     predictor was not stepped in between, so gradients are exact);
  3. rebuild the memory from scratch with every sentence of b_i, then
     predict and store the losses of b_{i+1} (skipped at the last
     step);
  4. update encoder and extractor weights from the extraction loss.

So each epoch performs B extractor updates and B-1 predictor updates.
The two parameter sets never mix gradients: the predictor reads
features re-wrapped as constants, so its backward pass stops before
the encoder.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .config import Config
from .corpus import Sentence
from .extractor import ee_loss_batch
from .mblp import Pack
from .selection import balanced, importance


def mse_loss(pred: ag.Tensor, true: np.ndarray) -> ag.Tensor:
    """Summed squared error between loss predictions and true losses.

    Callers pass both aligned by descending true loss; the sum itself
    does not depend on that order.
    """
    diff = pred - ag.Tensor(np.asarray(true, dtype=np.float64))
    return ag.square(diff).sum()


def _hinge_true_desc(pred: ag.Tensor, true: np.ndarray) -> ag.Tensor:
    order = np.argsort(-np.asarray(true, dtype=np.float64), kind="stable")
    v = pred[order]
    return ag.relu(v[1:] - v[:-1]).sum()


def internal_rank_loss(pred: ag.Tensor, true: np.ndarray) -> ag.Tensor:
    """Hinge on adjacent prediction pairs sorted by true loss descending."""
    if pred.data.size < 2:
        return ag.Tensor(0.0)
    return _hinge_true_desc(pred, true)


def external_rank_loss(pred_imps: ag.Tensor, true_imps: np.ndarray) -> ag.Tensor:
    """Same hinge across sentences, on per-sentence importance values."""
    if pred_imps.data.size < 2:
        return ag.Tensor(0.0)
    return _hinge_true_desc(pred_imps, true_imps)


def predicted_importance(pred: ag.Tensor, m: int | None) -> ag.Tensor:
    """Mean of the m largest predicted losses (differentiable gather)."""
    if pred.data.size == 0:
        return ag.Tensor(0.0)
    order = np.argsort(-pred.data, kind="stable")
    if m is not None:
        order = order[:m]
    return pred[order].mean()


def slice_flat(flat: ag.Tensor, packs: list[Pack]) -> list[ag.Tensor]:
    """Per-sentence views of a concat-pack prediction, graph intact."""
    kt = sum(p.h_tr.shape[0] for p in packs)
    out, t_off, a_off = [], 0, kt
    for p in packs:
        k, kn = p.h_tr.shape[0], p.h_ar.shape[0]
        if k + kn == 0:
            out.append(ag.Tensor(np.zeros(0)))
        else:
            out.append(ag.concat([flat[t_off:t_off + k],
                                  flat[a_off:a_off + kn]], axis=0))
        t_off += k
        a_off += kn
    return out


def _call(hooks, name):
    if hooks and name in hooks:
        hooks[name]()


def train_round(model, sentences: list[Sentence], cfg: Config,
                rng: np.random.Generator, round_idx: int = 0,
                log_fn=None, hooks=None) -> dict:
    """Train on the current labeled set; returns counter/loss stats."""
    tr = cfg.train
    schema = model.schema
    m = cfg.select.m
    stats = {"epochs": 0, "n_ee_updates": 0, "n_mblp_updates": 0,
             "per_epoch": [], "final_ee_loss": None}
    if not sentences:
        return stats
    prev, stall = None, 0
    for epoch in range(tr.epochs):
        order = rng.permutation(len(sentences))
        batches = [[sentences[j] for j in order[o:o + tr.batch_size]]
                   for o in range(0, len(sentences), tr.batch_size)]
        pending = None
        epoch_ee, epoch_counts = 0.0, [0, 0]  # [ee, mblp]
        for step, batch in enumerate(batches):
            feats = model.encode_sentences(batch)
            preds = [model.extractor.predict(f, s)
                     for f, s in zip(feats, batch)]
            ee_mean, per_pred = ee_loss_batch(preds, [s.labels for s in batch])
            true_bal = [balanced(v, s.k, schema.n_types, schema.n_bio)
                        for v, s in zip(per_pred, batch)]

            l_mse = l_ri = l_re = 0.0
            if pending is not None and model.predictor is not None:
                if pending["version"] != model.predictor.version:
                    raise RuntimeError("predictor changed between storing and "
                                       "consuming delayed predictions")
                pv_parts = slice_flat(pending["pv_flat"], pending["packs"])
                total = None
                imp_pred, imp_true = [], []
                for pv, tb in zip(pv_parts, true_bal):
                    s_mse = mse_loss(pv, tb)
                    s_ri = internal_rank_loss(pv, tb)
                    part = s_mse + s_ri
                    total = part if total is None else total + part
                    imp_pred.append(predicted_importance(pv, m).reshape(1))
                    imp_true.append(importance(tb, m))
                    l_mse += s_mse.item()
                    l_ri += s_ri.item()
                if total is not None:
                    re = external_rank_loss(ag.concat(imp_pred, axis=0),
                                            np.array(imp_true))
                    l_re = re.item()
                    total = total + re
                    _call(hooks, "pre_mblp_update")
                    model.opt_m.zero_grad()
                    total.backward()
                    model.opt_m.step()
                    model.predictor.version += 1
                    _call(hooks, "post_mblp_update")
                    stats["n_mblp_updates"] += 1
                    epoch_counts[1] += 1

            if model.predictor is not None and step + 1 < len(batches):
                # memory chain reads constants: predictor gradients must
                # stop at the encoder boundary
                smm_feats = [ag.Tensor(f.data) for f in feats]
                nxt = batches[step + 1]
                with ag.no_grad():
                    nfeats = model.encode_sentences(nxt)
                    packs = [Pack.from_prediction(model.extractor.predict(f, s))
                             for f, s in zip(nfeats, nxt)]
                mem = model.predictor.reset()
                for f_c in smm_feats:
                    mem = model.predictor.update(mem, f_c)
                pv_flat = model.predictor.predict(mem, Pack.concat(packs))
                pending = {"pv_flat": pv_flat, "packs": packs,
                           "version": model.predictor.version}
            else:
                pending = None

            _call(hooks, "pre_ee_update")
            model.opt_ee.zero_grad()
            ee_mean.backward()
            model.opt_ee.step()
            _call(hooks, "post_ee_update")
            stats["n_ee_updates"] += 1
            epoch_counts[0] += 1
            epoch_ee += ee_mean.item() * len(batch)
            if log_fn:
                log_fn({"round": round_idx, "epoch": epoch, "step": step,
                        "l_ee": ee_mean.item(), "l_mse": l_mse,
                        "l_rI": l_ri, "l_rE": l_re})

        stats["epochs"] += 1
        stats["per_epoch"].append(tuple(epoch_counts))
        cur = epoch_ee / len(sentences)
        stats["final_ee_loss"] = cur
        if prev is not None and prev - cur < tr.early_stop_rtol * abs(prev):
            stall += 1
            if stall >= tr.early_stop_patience:
                break
        else:
            stall = 0
        prev = cur
    return stats
