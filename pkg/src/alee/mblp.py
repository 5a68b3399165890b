"""Memory-based loss prediction.

Two task categories ("tr", "ar") each keep a sentence-level memory
matrix M of shape (slots, d_m). Feeding a sentence S updates each
memory through a gated write:

    f = Att(M_old W_qf, B(S), B(S))
    g = Sigmoid(W_g [f; M_old] + b_g)          per-slot scalar gate
    M_new = g (f W_m) + (1 - g) M_old

A prediction with hidden feature h and output distribution P gets its
loss estimate from

    h_M = Att(h W_qh, M, M)
    L_pred = softplus(F([h; P; h_M]))

F is a two-layer head per task; softplus keeps estimates positive like
the cross-entropy targets. The predictor consumes detached h/P/B(S)
only, so its gradients never reach encoder or extractor weights.

NoMemoryPredictor drops h_M and the memory machinery but keeps the
same interface, giving the plain loss-prediction baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import kernels
from .extractor import Prediction

TASKS = ("tr", "ar")


@dataclass
class MemoryState:
    mem: dict[str, ag.Tensor]


@dataclass
class Pack:
    """Detached per-sentence inputs in canonical prediction order."""

    h_tr: np.ndarray  # (k, d_h)
    p_tr: np.ndarray  # (k, n_types)
    h_ar: np.ndarray  # (k*n, 3*d_h)
    p_ar: np.ndarray  # (k*n, n_bio)

    @property
    def n_preds(self) -> int:
        return self.h_tr.shape[0] + self.h_ar.shape[0]

    @classmethod
    def from_prediction(cls, pred: Prediction) -> "Pack":
        with ag.no_grad():
            p_tr = np.exp(kernels.log_softmax(pred.logits_tr.data))
            p_ar = np.exp(kernels.log_softmax(pred.logits_ar.data))
        return cls(h_tr=pred.h_tr.data, p_tr=p_tr,
                   h_ar=pred.h_ar.data, p_ar=p_ar)

    @staticmethod
    def concat(packs: list["Pack"]) -> "Pack":
        return Pack(h_tr=np.concatenate([p.h_tr for p in packs]),
                    p_tr=np.concatenate([p.p_tr for p in packs]),
                    h_ar=np.concatenate([p.h_ar for p in packs]),
                    p_ar=np.concatenate([p.p_ar for p in packs]))


def split_by_sentence(flat: np.ndarray, packs: list[Pack]) -> list[np.ndarray]:
    """Undo a concat-pack prediction back into per-sentence vectors.

    The flat vector holds all trigger rows first, then all argument
    rows, each grouped per sentence in order.
    """
    kt = sum(p.h_tr.shape[0] for p in packs)
    out = []
    t_off, a_off = 0, kt
    for p in packs:
        k, kn = p.h_tr.shape[0], p.h_ar.shape[0]
        out.append(np.concatenate([flat[t_off:t_off + k],
                                   flat[a_off:a_off + kn]]))
        t_off += k
        a_off += kn
    return out


class SmmNetwork:
    """Memory module plus the memory-conditioned loss head."""

    def __init__(self, rng: np.random.Generator, d_h: int, n_types: int,
                 n_bio: int, d_m: int = 256, heads: int = 4, slots: int = 4,
                 hidden: int = 64):
        if d_m % heads or d_h % heads:
            raise ValueError("heads must divide both d_h and d_m")
        self.d_h, self.d_m, self.heads, self.slots = d_h, d_m, heads, slots
        self.h_dims = {"tr": d_h, "ar": 3 * d_h}
        self.p_dims = {"tr": n_types, "ar": n_bio}
        self.m0, self.w_qf, self.w_m, self.w_g = {}, {}, {}, {}
        self.w_qh, self.f1, self.f2 = {}, {}, {}
        for p in TASKS:
            self.m0[p] = ag.parameter(0.1 * rng.standard_normal((slots, d_m)))
            self.w_qf[p] = ag.Linear(rng, d_m, d_h, f"{p}.w_qf")
            self.w_m[p] = ag.Linear(rng, d_h, d_m, f"{p}.w_m")
            self.w_g[p] = ag.Linear(rng, d_h + d_m, 1, f"{p}.w_g")
            self.w_qh[p] = ag.Linear(rng, self.h_dims[p], d_m, f"{p}.w_qh")
            f_in = self.h_dims[p] + self.p_dims[p] + d_m
            self.f1[p] = ag.Linear(rng, f_in, hidden, f"{p}.f1")
            self.f2[p] = ag.Linear(rng, hidden, 1, f"{p}.f2")
        self.n_updates = 0
        self.version = 0  # bumped by the trainer after each Theta_M step

    def params(self) -> dict[str, ag.Tensor]:
        out = {}
        for p in TASKS:
            out[f"{p}.m0"] = self.m0[p]
            for lin in (self.w_qf[p], self.w_m[p], self.w_g[p],
                        self.w_qh[p], self.f1[p], self.f2[p]):
                out.update(lin.params())
        return out

    def reset(self) -> MemoryState:
        # hand out the learnable initial memories themselves so gradient
        # reaches M0 through any later update chain
        return MemoryState(mem={p: self.m0[p] for p in TASKS})

    def update(self, state: MemoryState, feats: ag.Tensor) -> MemoryState:
        """One gated write of sentence features B(S), shape (n, d_h)."""
        # both task queries share the keys, so one attention call serves both
        qs = ag.concat([self.w_qf[p](state.mem[p]) for p in TASKS], axis=0)
        fs = ag.attention(qs, feats, feats, heads=self.heads)
        new = {}
        for j, p in enumerate(TASKS):
            m_old = state.mem[p]
            f = fs[j * self.slots:(j + 1) * self.slots]
            g = ag.sigmoid(self.w_g[p](ag.concat([f, m_old], axis=1)))
            new[p] = g * self.w_m[p](f) + (1.0 - g) * m_old
        self.n_updates += 1
        return MemoryState(mem=new)

    def gates(self, state: MemoryState, feats: ag.Tensor) -> dict[str, np.ndarray]:
        """Gate values the next update would apply (diagnostics/tests)."""
        out = {}
        with ag.no_grad():
            for p in TASKS:
                m_old = state.mem[p]
                q = self.w_qf[p](m_old)
                f = ag.attention(q, feats, feats, heads=self.heads)
                g = ag.sigmoid(self.w_g[p](ag.concat([f, m_old], axis=1)))
                out[p] = g.data.ravel()
        return out

    def predict(self, state: MemoryState, pack: Pack) -> ag.Tensor:
        """Balanced-loss estimates, trigger rows then argument rows."""
        parts = []
        for p, h_np, p_np in (("tr", pack.h_tr, pack.p_tr),
                              ("ar", pack.h_ar, pack.p_ar)):
            r = h_np.shape[0]
            if r == 0:
                continue
            h = ag.Tensor(h_np)
            m = state.mem[p]
            h_m = ag.attention(self.w_qh[p](h), m, m, heads=self.heads)
            x = ag.concat([h, ag.Tensor(p_np), h_m], axis=1)
            out = ag.softplus(self.f2[p](ag.relu(self.f1[p](x))))
            parts.append(out.reshape(r))
        if not parts:
            return ag.Tensor(np.zeros(0))
        return ag.concat(parts, axis=0)


class NoMemoryPredictor:
    """Loss head over [h; P] alone; same interface as SmmNetwork."""

    def __init__(self, rng: np.random.Generator, d_h: int, n_types: int,
                 n_bio: int, hidden: int = 64):
        self.h_dims = {"tr": d_h, "ar": 3 * d_h}
        self.p_dims = {"tr": n_types, "ar": n_bio}
        self.f1, self.f2 = {}, {}
        for p in TASKS:
            f_in = self.h_dims[p] + self.p_dims[p]
            self.f1[p] = ag.Linear(rng, f_in, hidden, f"{p}.f1")
            self.f2[p] = ag.Linear(rng, hidden, 1, f"{p}.f2")
        self.n_updates = 0
        self.version = 0

    def params(self) -> dict[str, ag.Tensor]:
        out = {}
        for p in TASKS:
            out.update(self.f1[p].params())
            out.update(self.f2[p].params())
        return out

    def reset(self) -> MemoryState:
        return MemoryState(mem={})

    def update(self, state: MemoryState, feats: ag.Tensor) -> MemoryState:
        return state

    def predict(self, state: MemoryState, pack: Pack) -> ag.Tensor:
        parts = []
        for p, h_np, p_np in (("tr", pack.h_tr, pack.p_tr),
                              ("ar", pack.h_ar, pack.p_ar)):
            if h_np.shape[0] == 0:
                continue
            x = ag.concat([ag.Tensor(h_np), ag.Tensor(p_np)], axis=1)
            out = ag.softplus(self.f2[p](ag.relu(self.f1[p](x))))
            parts.append(out.reshape(h_np.shape[0]))
        if not parts:
            return ag.Tensor(np.zeros(0))
        return ag.concat(parts, axis=0)
