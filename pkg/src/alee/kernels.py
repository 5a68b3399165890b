"""Hot numeric kernels: numba-jitted inner loops with pure-numpy fallbacks.

The backend is chosen once at import time from the ALEE_NUMBA env var:
"1"/"on" forces the jitted path, "0"/"off" forces numpy, anything else
(or unset) tries numba and silently falls back. `BACKEND` records the
choice; `benchmarks/bench_kernels.py` times both paths side by side.

All kernels take float64 C-contiguous arrays. Attention kernels work on
a flattened group axis G (= batch * heads), so callers reshape once and
the kernels stay shape-monomorphic for the JIT.
"""

import os

import numpy as np


def _want_numba() -> bool | None:
    flag = os.environ.get("ALEE_NUMBA", "").strip().lower()
    if flag in ("1", "true", "on", "yes"):
        return True
    if flag in ("0", "false", "off", "no"):
        return False
    return None  # auto


_REQUESTED = _want_numba()

if _REQUESTED is False:
    _HAVE_NUMBA = False
else:
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _REQUESTED is True:
            raise
        _HAVE_NUMBA = False

BACKEND = "numba" if _HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def _attn_forward_np(q, k, v, mask):
    # q: (G, nq, d), k: (G, nk, d), v: (G, nk, dv), mask: (G, nk) 1/0 or None
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = np.matmul(q, np.swapaxes(k, -1, -2)) * scale
    if mask is not None:
        scores = np.where(mask[:, None, :] > 0.0, scores, -np.inf)
    scores -= scores.max(axis=-1, keepdims=True)
    attn = np.exp(scores)
    attn /= attn.sum(axis=-1, keepdims=True)
    out = np.matmul(attn, v)
    return out, attn


def _attn_backward_np(g_out, attn, q, k, v):
    scale = 1.0 / np.sqrt(q.shape[-1])
    dv = np.matmul(np.swapaxes(attn, -1, -2), g_out)
    d_attn = np.matmul(g_out, np.swapaxes(v, -1, -2))
    # softmax backward: dS = A * (dA - sum(A * dA))
    ds = attn * (d_attn - np.sum(attn * d_attn, axis=-1, keepdims=True))
    ds *= scale
    dq = np.matmul(ds, k)
    dk = np.matmul(np.swapaxes(ds, -1, -2), q)
    return dq, dk, dv


def _log_softmax_np(x):
    # x: (n, K) -> logp (n, K)
    m = x.max(axis=-1, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    return z - lse


def _log_softmax_backward_np(g, logp):
    p = np.exp(logp)
    return g - p * g.sum(axis=-1, keepdims=True)


def _spans_from_bio_np(labels, n_roles):
    # labels: (n,) int64 over [O, B-r1, I-r1, ..., B-rN, I-rN]
    spans = np.empty((labels.shape[0], 3), dtype=np.int64)
    count = 0
    start = -1
    role = -1
    for i, lab in enumerate(labels):
        if lab == 0:
            if start >= 0:
                spans[count] = (start, i, role)
                count += 1
                start = -1
        elif (lab - 1) % 2 == 0:  # B-r
            if start >= 0:
                spans[count] = (start, i, role)
                count += 1
            start = i
            role = (lab - 1) // 2
        else:  # I-r
            r = (lab - 2) // 2
            if start >= 0 and r == role:
                continue
            # stray I-r: treat as a new span start (mirrors decode repair)
            if start >= 0:
                spans[count] = (start, i, role)
                count += 1
            start = i
            role = r
    if start >= 0:
        spans[count] = (start, labels.shape[0], role)
        count += 1
    return spans[:count].copy()


def _repair_bio_np(labels):
    # stray I-r (sequence start, after O, or after a different role) -> B-r
    out = labels.copy()
    prev_role = -1
    for i, lab in enumerate(out):
        if lab == 0:
            prev_role = -1
        elif (lab - 1) % 2 == 0:
            prev_role = (lab - 1) // 2
        else:
            r = (lab - 2) // 2
            if r != prev_role:
                out[i] = 1 + 2 * r
            prev_role = r
    return out


def _kcenter_greedy_np(x, min_dist, q):
    picks = np.empty(q, dtype=np.int64)
    md = min_dist.copy()
    for t in range(q):
        idx = int(np.argmax(md))
        picks[t] = idx
        d = np.sqrt(((x - x[idx]) ** 2).sum(axis=1))
        np.minimum(md, d, out=md)
        md[idx] = -1.0  # never re-pick
    return picks


# ---------------------------------------------------------------------------
# numba-jitted implementations
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _attn_forward_nb(q, k, v, mask):
        G, nq, d = q.shape
        nk = k.shape[1]
        dv = v.shape[2]
        scale = 1.0 / np.sqrt(d)
        out = np.empty((G, nq, dv))
        attn = np.empty((G, nq, nk))
        for g in range(G):
            for i in range(nq):
                hi = -np.inf
                for j in range(nk):
                    if mask[g, j] > 0.0:
                        s = 0.0
                        for c in range(d):
                            s += q[g, i, c] * k[g, j, c]
                        s *= scale
                    else:
                        s = -np.inf
                    attn[g, i, j] = s
                    if s > hi:
                        hi = s
                tot = 0.0
                for j in range(nk):
                    e = np.exp(attn[g, i, j] - hi)
                    attn[g, i, j] = e
                    tot += e
                for j in range(nk):
                    attn[g, i, j] /= tot
                for c in range(dv):
                    acc = 0.0
                    for j in range(nk):
                        acc += attn[g, i, j] * v[g, j, c]
                    out[g, i, c] = acc
        return out, attn

    @njit(cache=True)
    def _attn_backward_nb(g_out, attn, q, k, v):
        G, nq, d = q.shape
        nk = k.shape[1]
        dv = v.shape[2]
        scale = 1.0 / np.sqrt(d)
        dq = np.zeros_like(q)
        dk = np.zeros_like(k)
        dv_ = np.zeros_like(v)
        for g in range(G):
            for i in range(nq):
                # d_attn[j] = g_out[i] . v[j]; row-sum for softmax backward
                row_dot = 0.0
                d_attn = np.empty(nk)
                for j in range(nk):
                    s = 0.0
                    for c in range(dv):
                        s += g_out[g, i, c] * v[g, j, c]
                    d_attn[j] = s
                    row_dot += attn[g, i, j] * s
                for j in range(nk):
                    ds = attn[g, i, j] * (d_attn[j] - row_dot) * scale
                    a = attn[g, i, j]
                    for c in range(d):
                        dq[g, i, c] += ds * k[g, j, c]
                        dk[g, j, c] += ds * q[g, i, c]
                    for c in range(dv):
                        dv_[g, j, c] += a * g_out[g, i, c]
        return dq, dk, dv_

    @njit(cache=True)
    def _log_softmax_nb(x):
        n, kk = x.shape
        out = np.empty_like(x)
        for i in range(n):
            hi = x[i, 0]
            for j in range(1, kk):
                if x[i, j] > hi:
                    hi = x[i, j]
            tot = 0.0
            for j in range(kk):
                tot += np.exp(x[i, j] - hi)
            lse = np.log(tot) + hi
            for j in range(kk):
                out[i, j] = x[i, j] - lse
        return out

    @njit(cache=True)
    def _log_softmax_backward_nb(g, logp):
        n, kk = logp.shape
        out = np.empty_like(logp)
        for i in range(n):
            gs = 0.0
            for j in range(kk):
                gs += g[i, j]
            for j in range(kk):
                out[i, j] = g[i, j] - np.exp(logp[i, j]) * gs
        return out

    @njit(cache=True)
    def _spans_from_bio_nb(labels, n_roles):
        spans = np.empty((labels.shape[0], 3), dtype=np.int64)
        count = 0
        start = -1
        role = -1
        for i in range(labels.shape[0]):
            lab = labels[i]
            if lab == 0:
                if start >= 0:
                    spans[count, 0] = start
                    spans[count, 1] = i
                    spans[count, 2] = role
                    count += 1
                    start = -1
            elif (lab - 1) % 2 == 0:
                if start >= 0:
                    spans[count, 0] = start
                    spans[count, 1] = i
                    spans[count, 2] = role
                    count += 1
                start = i
                role = (lab - 1) // 2
            else:
                r = (lab - 2) // 2
                if start >= 0 and r == role:
                    continue
                if start >= 0:
                    spans[count, 0] = start
                    spans[count, 1] = i
                    spans[count, 2] = role
                    count += 1
                start = i
                role = r
        if start >= 0:
            spans[count, 0] = start
            spans[count, 1] = labels.shape[0]
            spans[count, 2] = role
            count += 1
        return spans[:count].copy()

    @njit(cache=True)
    def _repair_bio_nb(labels):
        out = labels.copy()
        prev_role = -1
        for i in range(out.shape[0]):
            lab = out[i]
            if lab == 0:
                prev_role = -1
            elif (lab - 1) % 2 == 0:
                prev_role = (lab - 1) // 2
            else:
                r = (lab - 2) // 2
                if r != prev_role:
                    out[i] = 1 + 2 * r
                prev_role = r
        return out

    @njit(cache=True)
    def _kcenter_greedy_nb(x, min_dist, q):
        n, d = x.shape
        picks = np.empty(q, dtype=np.int64)
        md = min_dist.copy()
        for t in range(q):
            best = 0
            hi = md[0]
            for i in range(1, n):
                if md[i] > hi:
                    hi = md[i]
                    best = i
            picks[t] = best
            for i in range(n):
                s = 0.0
                for c in range(d):
                    diff = x[i, c] - x[best, c]
                    s += diff * diff
                dist = np.sqrt(s)
                if dist < md[i]:
                    md[i] = dist
            md[best] = -1.0
        return picks


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def attn_forward(q, k, v, mask=None):
    """Scaled-dot-product attention over grouped heads.

    q (G,nq,d), k (G,nk,d), v (G,nk,dv); mask (G,nk) with 1=valid, 0=pad.
    Returns (out (G,nq,dv), attn (G,nq,nk)).
    """
    q, k, v = _c(q), _c(k), _c(v)
    if _HAVE_NUMBA:
        m = np.ones(k.shape[:2]) if mask is None else _c(mask)
        return _attn_forward_nb(q, k, v, m)
    return _attn_forward_np(q, k, v, mask if mask is None else _c(mask))


def attn_backward(g_out, attn, q, k, v):
    g_out, attn, q, k, v = _c(g_out), _c(attn), _c(q), _c(k), _c(v)
    if _HAVE_NUMBA:
        return _attn_backward_nb(g_out, attn, q, k, v)
    return _attn_backward_np(g_out, attn, q, k, v)


def log_softmax(x):
    x = _c(x)
    if _HAVE_NUMBA:
        return _log_softmax_nb(x)
    return _log_softmax_np(x)


def log_softmax_backward(g, logp):
    g, logp = _c(g), _c(logp)
    if _HAVE_NUMBA:
        return _log_softmax_backward_nb(g, logp)
    return _log_softmax_backward_np(g, logp)


def spans_from_bio(labels, n_roles):
    """Extract (start, end, role) spans from a BIO index sequence."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if _HAVE_NUMBA:
        return _spans_from_bio_nb(labels, n_roles)
    return _spans_from_bio_np(labels, n_roles)


def repair_bio(labels):
    """Rewrite stray I-r tags (no matching open span) as B-r."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if _HAVE_NUMBA:
        return _repair_bio_nb(labels)
    return _repair_bio_np(labels)


def kcenter_greedy(x, min_dist, q):
    """Greedy max-min selection of q rows of x.

    min_dist holds each row's current distance to the nearest existing
    center (np.inf when there are none). Returns pick indices in order;
    argmax ties resolve to the lowest index.
    """
    x = _c(x)
    min_dist = _c(min_dist)
    if _HAVE_NUMBA:
        return _kcenter_greedy_nb(x, min_dist, int(q))
    return _kcenter_greedy_np(x, min_dist, int(q))


def numpy_impls():
    """Reference implementations, used by the fallback tests and benchmark."""
    return {
        "attn_forward": _attn_forward_np,
        "attn_backward": _attn_backward_np,
        "log_softmax": _log_softmax_np,
        "log_softmax_backward": _log_softmax_backward_np,
        "spans_from_bio": _spans_from_bio_np,
        "repair_bio": _repair_bio_np,
        "kcenter_greedy": _kcenter_greedy_np,
    }
