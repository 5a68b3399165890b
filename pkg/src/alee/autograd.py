"""Minimal reverse-mode autodiff over float64 numpy arrays.

A Tensor wraps an ndarray; ops build a DAG only while gradients are
enabled (see `no_grad`), so inference paths pay no tape overhead.
Fused ops (attention, log_softmax, layer_norm, span_mean) delegate
their inner loops to `kernels`.

Every backward here is checked against central finite differences in
the test suite; treat those tests as the contract when editing.
"""

from __future__ import annotations

import numpy as np

from . import kernels

_GRAD_ENABLED = [True]


def grad_enabled() -> bool:
    return _GRAD_ENABLED[0]


class no_grad:
    """Context manager disabling tape construction."""

    def __enter__(self):
        self._prev = _GRAD_ENABLED[0]
        _GRAD_ENABLED[0] = False
        return self

    def __exit__(self, *exc):
        _GRAD_ENABLED[0] = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._bwd = None

    # -- basic introspection ------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- graph --------------------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.data)
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(grad, dtype=np.float64)
        for node in reversed(topo):
            if node._bwd is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._bwd(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g
        # interior grads are kept only while needed
        for node in topo:
            if node is not self and node._bwd is not None:
                node.grad = None

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, _as_tensor(other) * -1.0)

    def __rsub__(self, other):
        return add(_as_tensor(other), self * -1.0)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self * (1.0 / other)
        return mul(self, reciprocal(other))

    def __neg__(self):
        return self * -1.0

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _node(data, parents, bwd) -> Tensor:
    t = Tensor.__new__(Tensor)
    t.data = data
    t.grad = None
    if _GRAD_ENABLED[0] and any(p.requires_grad for p in parents):
        t.requires_grad = True
        t._parents = tuple(parents)
        t._bwd = bwd
    else:
        t.requires_grad = False
        t._parents = ()
        t._bwd = None
    return t


def _unbroadcast(g, shape):
    # reduce gradient g down to `shape` after numpy broadcasting
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / arithmetic
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _node(out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def bwd(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _node(out, (a, b), bwd)


def reciprocal(a: Tensor) -> Tensor:
    out = 1.0 / a.data

    def bwd(g):
        return (-g * out * out,)

    return _node(out, (a,), bwd)


def square(a: Tensor) -> Tensor:
    out = a.data * a.data

    def bwd(g):
        return (2.0 * g * a.data,)

    return _node(out, (a,), bwd)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def bwd(g):
        return (g * out,)

    return _node(out, (a,), bwd)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def bwd(g):
        return (g / a.data,)

    return _node(out, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def bwd(g):
        return (g * (a.data > 0.0),)

    return _node(out, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return _node(out, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _node(out, (a,), bwd)


def softplus(a: Tensor) -> Tensor:
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def bwd(g):
        s = np.empty_like(x)
        pos = x >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        s[~pos] = ex / (1.0 + ex)
        return (g * s,)

    return _node(out, (a,), bwd)


# ---------------------------------------------------------------------------
# linear algebra / shape
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = np.matmul(a.data, b.data)

    def bwd(g):
        if a.data.ndim == 1 and b.data.ndim == 1:
            return g * b.data, g * a.data
        # promote 1-D operands to matrices so one batched formula covers all
        ad = a.data[None, :] if a.data.ndim == 1 else a.data
        bd = b.data[:, None] if b.data.ndim == 1 else b.data
        gg = g
        if a.data.ndim == 1:
            gg = gg[..., None, :]
        if b.data.ndim == 1:
            gg = gg[..., :, None]
        ga = np.matmul(gg, np.swapaxes(bd, -1, -2))
        gb = np.matmul(np.swapaxes(ad, -1, -2), gg)
        if a.data.ndim == 1:
            ga = ga.reshape(g.shape[:-1] + a.data.shape)
        if b.data.ndim == 1:
            gb = gb.reshape(gb.shape[:-1])
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _node(out, (a, b), bwd)


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _node(out, (a,), bwd)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        n = a.data.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.data.shape[i] for i in axis]))
    else:
        n = a.data.shape[axis]
    return tsum(a, axis, keepdims) * (1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def bwd(g):
        return (g.reshape(a.data.shape),)

    return _node(out, (a,), bwd)


def concat(tensors, axis=0) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        grads = []
        sl = [slice(None)] * g.ndim
        for i in range(len(datas)):
            sl[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(sl)])
        return tuple(grads)

    return _node(out, tuple(tensors), bwd)


def _key_has_int_array(key):
    items = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, np.ndarray) and k.dtype != bool for k in items)


def getitem(a: Tensor, key) -> Tensor:
    out = a.data[key]

    def bwd(g):
        ga = np.zeros_like(a.data)
        if _key_has_int_array(key):
            np.add.at(ga, key, g)
        else:
            ga[key] += g
        return (ga,)

    return _node(out, (a,), bwd)


def take_rows(a: Tensor, idx) -> Tensor:
    """Row gather (embedding lookup); duplicate indices accumulate."""
    idx = np.asarray(idx, dtype=np.int64)
    return getitem(a, (idx,))


# ---------------------------------------------------------------------------
# fused ops
# ---------------------------------------------------------------------------

def log_softmax(a: Tensor) -> Tensor:
    """Row-wise log-softmax over the last axis."""
    flat = a.data.reshape(-1, a.data.shape[-1])
    logp = kernels.log_softmax(flat).reshape(a.data.shape)

    def bwd(g):
        gf = g.reshape(-1, g.shape[-1])
        lf = logp.reshape(-1, logp.shape[-1])
        return (kernels.log_softmax_backward(gf, lf).reshape(a.data.shape),)

    return _node(logp, (a,), bwd)


def attention(query: Tensor, keys: Tensor, values: Tensor, heads: int = 1,
              mask=None) -> Tensor:
    """Projection-free scaled-dot-product attention.

    query (..., nq, d) or (d,); keys (..., nk, d); values (..., nk, dv).
    heads splits d and dv into equal chunks attended independently and
    re-concatenated, with no learned maps. Key/value row counts must
    match; `mask` (..., nk) marks valid keys with 1.
    """
    single = query.data.ndim == 1
    q = query if not single else reshape(query, (1, -1))
    if q.data.shape[-1] != keys.data.shape[-1]:
        raise ValueError(
            f"query dim {q.data.shape[-1]} != key dim {keys.data.shape[-1]}")
    if keys.data.shape[:-1] != values.data.shape[:-1]:
        raise ValueError("keys and values must have matching row counts")
    d = q.data.shape[-1]
    dv = values.data.shape[-1]
    if d % heads or dv % heads:
        raise ValueError(f"dims ({d}, {dv}) not divisible by heads={heads}")

    batch_shape = q.data.shape[:-2]
    nq, nk = q.data.shape[-2], keys.data.shape[-2]
    g_count = int(np.prod(batch_shape, dtype=int)) if batch_shape else 1

    def to_groups(x, dim):
        # (..., n, dim) -> (G*heads, n, dim/heads)
        arr = x.reshape(g_count, -1, heads, dim // heads)
        arr = np.ascontiguousarray(arr.transpose(0, 2, 1, 3))
        return arr.reshape(g_count * heads, -1, dim // heads)

    def from_groups(arr, n, dim):
        arr = arr.reshape(g_count, heads, n, dim // heads).transpose(0, 2, 1, 3)
        return np.ascontiguousarray(arr).reshape(batch_shape + (n, dim))

    qg = to_groups(q.data, d)
    kg = to_groups(keys.data, d)
    vg = to_groups(values.data, dv)
    mg = None
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64).reshape(g_count, nk)
        mg = np.repeat(m, heads, axis=0)
    out_g, attn_g = kernels.attn_forward(qg, kg, vg, mg)
    out = from_groups(out_g, nq, dv)

    def bwd(g):
        gg = to_groups(g, dv)
        dq, dk, dvv = kernels.attn_backward(gg, attn_g, qg, kg, vg)
        return (from_groups(dq, nq, d),
                from_groups(dk, nk, d),
                from_groups(dvv, nk, dv))

    res = _node(out, (q, keys, values), bwd)
    if single:
        res = reshape(res, (dv,))
    return res


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data
    n = x.data.shape[-1]

    def bwd(g):
        dgamma = _unbroadcast(g * xhat, gamma.data.shape)
        dbeta = _unbroadcast(g, beta.data.shape)
        gx = g * gamma.data
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True)
                    - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        return dx, dgamma, dbeta

    return _node(out, (x, gamma, beta), bwd)


def span_mean(feats: Tensor, spans) -> Tensor:
    """Mean of feature rows over [start, end) for each span."""
    rows = np.empty((len(spans), feats.data.shape[-1]))
    for i, (s, e) in enumerate(spans):
        rows[i] = feats.data[s:e].mean(axis=0)

    def bwd(g):
        gf = np.zeros_like(feats.data)
        for i, (s, e) in enumerate(spans):
            gf[s:e] += g[i] / (e - s)
        return (gf,)

    return _node(rows, (feats,), bwd)


# ---------------------------------------------------------------------------
# parameters / optimization
# ---------------------------------------------------------------------------

def parameter(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


class Linear:
    """Affine map with glorot-initialized weight."""

    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, name: str):
        self.W = parameter(glorot(rng, d_in, d_out))
        self.b = parameter(np.zeros(d_out))
        self.name = name

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.W + self.b

    def params(self) -> dict[str, Tensor]:
        return {f"{self.name}.W": self.W, f"{self.name}.b": self.b}


class SGD:
    """Plain SGD over a named parameter dict, with global-norm clipping."""

    def __init__(self, params: dict[str, Tensor], lr: float, clip_norm: float = 5.0):
        self.params = dict(params)
        self.lr = lr
        self.clip_norm = clip_norm
        self.steps = 0

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        grads = [(p, p.grad) for p in self.params.values() if p.grad is not None]
        if not grads:
            return
        if self.clip_norm is not None:
            total = np.sqrt(sum(float((g * g).sum()) for _, g in grads))
            scale = self.clip_norm / total if total > self.clip_norm else 1.0
        else:
            scale = 1.0
        for p, g in grads:
            p.data -= self.lr * scale * g
        self.steps += 1
