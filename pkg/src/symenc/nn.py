"""Reference graph classifier in plain numpy (float64), with backward pass.

Front end: stacked GraphSAGE-mean layers, global mean pooling and a linear
map to a 64-d window embedding. Back end: multi-head self-attention over the
window embeddings of a piece, mean over windows, linear classifier.

Parameters live in a flat ``dict[name, ndarray]`` so gradient checks and
checkpoints can walk them uniformly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ZeroVariance
from .graph import HOMOGENEOUS_KEY, NoteGraph, to_homogeneous


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    num_classes: int
    num_layers: int = 5
    hidden_dim: int = 64
    embedding_dim: int = 64
    attention_heads: int = 16
    relations: tuple = (HOMOGENEOUS_KEY,)

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        dims = (self.input_dim, self.num_classes, self.num_layers, self.hidden_dim,
                self.embedding_dim, self.attention_heads)
        if min(dims) <= 0:
            raise ValueError("all model dimensions must be positive")
        if self.embedding_dim % self.attention_heads:
            raise ValueError("embedding_dim must be divisible by attention_heads")
        if not self.relations:
            raise ValueError("at least one relation is required")

    @property
    def heterogeneous(self) -> bool:
        return self.relations != (HOMOGENEOUS_KEY,)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["relations"] = list(self.relations)
        return d


def _glorot(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(cfg: ModelConfig, seed: int = 0) -> dict:
    """Glorot-uniform weights and zero biases from a seeded generator."""
    rng = np.random.default_rng(seed)
    p = {}
    d_in = cfg.input_dim
    for layer in range(cfg.num_layers):
        p[f"sage{layer}.w_self"] = _glorot(rng, d_in, cfg.hidden_dim)
        for r in cfg.relations:
            p[f"sage{layer}.w_nbr.{r}"] = _glorot(rng, d_in, cfg.hidden_dim)
        p[f"sage{layer}.b"] = np.zeros(cfg.hidden_dim)
        d_in = cfg.hidden_dim
    e = cfg.embedding_dim
    p["proj.w"] = _glorot(rng, cfg.hidden_dim, e)
    p["proj.b"] = np.zeros(e)
    for name in ("q", "k", "v", "o"):
        p[f"attn.w{name}"] = _glorot(rng, e, e)
        p[f"attn.b{name}"] = np.zeros(e)
    p["cls.w"] = _glorot(rng, e, cfg.num_classes)
    p["cls.b"] = np.zeros(cfg.num_classes)
    return p


def param_count(params: dict, prefix: str = "") -> int:
    return int(sum(v.size for k, v in params.items() if k.startswith(prefix)))


# -- message passing ----------------------------------------------------------

@dataclass
class _MeanAgg:
    """Mean over in-neighbours for one relation: out[v] = mean x[u], u -> v."""

    src: np.ndarray
    dst: np.ndarray
    scale: np.ndarray  # 1 / in-degree per edge
    n: int

    @classmethod
    def from_edges(cls, edges, n: int) -> "_MeanAgg":
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge index out of range")
        deg = np.bincount(e[:, 1], minlength=n).astype(np.float64)
        return cls(e[:, 0], e[:, 1], 1.0 / deg[e[:, 1]] if e.size else np.empty(0), n)

    def forward(self, x):
        out = np.zeros((self.n, x.shape[1]))
        np.add.at(out, self.dst, x[self.src] * self.scale[:, None])
        return out

    def backward(self, g):
        out = np.zeros((self.n, g.shape[1]))
        np.add.at(out, self.src, g[self.dst] * self.scale[:, None])
        return out


@dataclass
class GraphInput:
    """Features and per-relation aggregators for one window graph."""

    x: np.ndarray
    aggs: dict = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]


def prepare_graph(graph: NoteGraph, cfg: ModelConfig) -> GraphInput:
    if graph.features.shape[1] != cfg.input_dim:
        raise ValueError(f"graph has {graph.features.shape[1]} features, model expects {cfg.input_dim}")
    if not cfg.heterogeneous and graph.heterogeneous:
        graph = to_homogeneous(graph)
    n = graph.num_nodes
    empty = np.empty((0, 2), np.int64)
    aggs = {r: _MeanAgg.from_edges(graph.edges.get(r, empty), n) for r in cfg.relations}
    return GraphInput(np.asarray(graph.features, dtype=np.float64), aggs)


def sage_layer(x, edges, w_self, w_nbr, b):
    """One GraphSAGE-mean layer: ReLU(x W_self + sum_r mean_r(x) W_r + b).

    ``edges`` is an [E, 2] array of (src, dst) pairs with ``w_nbr`` a matrix,
    or a dict of typed edge arrays with ``w_nbr`` a dict of matching keys.
    """
    x = np.asarray(x, dtype=np.float64)
    if not isinstance(edges, dict):
        edges, w_nbr = {HOMOGENEOUS_KEY: edges}, {HOMOGENEOUS_KEY: w_nbr}
    if x.shape[1] != w_self.shape[0]:
        raise ValueError(f"input width {x.shape[1]} does not match weight rows {w_self.shape[0]}")
    z = x @ w_self + b
    for r, e in edges.items():
        z = z + _MeanAgg.from_edges(e, x.shape[0]).forward(x) @ w_nbr[r]
    return np.maximum(z, 0.0)


# -- forward / backward -------------------------------------------------------

def _encode(g: GraphInput, p: dict, cfg: ModelConfig):
    h = g.x
    cache = []
    for layer in range(cfg.num_layers):
        means = {r: agg.forward(h) for r, agg in g.aggs.items()}
        z = h @ p[f"sage{layer}.w_self"] + p[f"sage{layer}.b"]
        for r, m in means.items():
            z = z + m @ p[f"sage{layer}.w_nbr.{r}"]
        cache.append((h, means, z))
        h = np.maximum(z, 0.0)
    if g.num_nodes == 0:
        return np.zeros(cfg.embedding_dim), (cache, None)
    pooled = h.mean(axis=0)
    return pooled @ p["proj.w"] + p["proj.b"], (cache, pooled)


def _encode_backward(g: GraphInput, p: dict, cfg: ModelConfig, state, d_emb, grads):
    cache, pooled = state
    if pooled is None:
        return
    grads["proj.w"] += np.outer(pooled, d_emb)
    grads["proj.b"] += d_emb
    dh = np.broadcast_to(p["proj.w"] @ d_emb / g.num_nodes, (g.num_nodes, cfg.hidden_dim))
    for layer in reversed(range(cfg.num_layers)):
        h, means, z = cache[layer]
        dz = dh * (z > 0)
        grads[f"sage{layer}.w_self"] += h.T @ dz
        grads[f"sage{layer}.b"] += dz.sum(axis=0)
        dh = dz @ p[f"sage{layer}.w_self"].T
        for r, m in means.items():
            w = p[f"sage{layer}.w_nbr.{r}"]
            grads[f"sage{layer}.w_nbr.{r}"] += m.T @ dz
            dh = dh + g.aggs[r].backward(dz @ w.T)


def encode_window(graph, params: dict, cfg: ModelConfig) -> np.ndarray:
    """64-d embedding of one window graph (zero vector for an empty graph)."""
    g = graph if isinstance(graph, GraphInput) else prepare_graph(graph, cfg)
    return _encode(g, params, cfg)[0]


def _softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _classify(emb: np.ndarray, p: dict, cfg: ModelConfig):
    m, e = emb.shape
    heads, dh = cfg.attention_heads, e // cfg.attention_heads
    q = emb @ p["attn.wq"] + p["attn.bq"]
    k = emb @ p["attn.wk"] + p["attn.bk"]
    v = emb @ p["attn.wv"] + p["attn.bv"]
    qh, kh, vh = (t.reshape(m, heads, dh).transpose(1, 0, 2) for t in (q, k, v))
    scores = qh @ kh.transpose(0, 2, 1) / math.sqrt(dh)
    attn = _softmax(scores)
    oh = attn @ vh
    o = oh.transpose(1, 0, 2).reshape(m, e)
    y = o @ p["attn.wo"] + p["attn.bo"]
    pooled = y.mean(axis=0)
    logits = pooled @ p["cls.w"] + p["cls.b"]
    return logits, attn, (emb, qh, kh, vh, attn, o, pooled)


def _classify_backward(p, cfg, state, d_logits, grads):
    emb, qh, kh, vh, attn, o, pooled = state
    m, e = emb.shape
    heads, dh = cfg.attention_heads, e // cfg.attention_heads
    grads["cls.w"] += np.outer(pooled, d_logits)
    grads["cls.b"] += d_logits
    dy = np.broadcast_to(p["cls.w"] @ d_logits / m, (m, e))
    grads["attn.wo"] += o.T @ dy
    grads["attn.bo"] += dy.sum(axis=0)
    do = dy @ p["attn.wo"].T
    doh = do.reshape(m, heads, dh).transpose(1, 0, 2)
    d_attn = doh @ vh.transpose(0, 2, 1)
    dvh = attn.transpose(0, 2, 1) @ doh
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True)) / math.sqrt(dh)
    dqh = d_scores @ kh
    dkh = d_scores.transpose(0, 2, 1) @ qh
    d_emb = np.zeros_like(emb)
    for name, dt in (("q", dqh), ("k", dkh), ("v", dvh)):
        flat = dt.transpose(1, 0, 2).reshape(m, e)
        grads[f"attn.w{name}"] += emb.T @ flat
        grads[f"attn.b{name}"] += flat.sum(axis=0)
        d_emb += flat @ p[f"attn.w{name}"].T
    return d_emb


def classify_piece(window_embeddings, params: dict, cfg: ModelConfig):
    """Class logits for a piece and the per-head attention weights [heads, M, M]."""
    emb = np.asarray(window_embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] == 0:
        raise ValueError("classify_piece needs at least one window embedding")
    logits, attn, _ = _classify(emb, params, cfg)
    return logits, attn


def _piece_inputs(piece, cfg):
    return [g if isinstance(g, GraphInput) else prepare_graph(g, cfg) for g in piece]


LOSSES = ("cross_entropy", "linear")


def _piece_loss(logits, label, loss):
    """Loss value and its gradient w.r.t. the logits.

    "linear" is the negated logit of ``label``; with a single window it
    makes the whole model piecewise linear, a useful gradient-check case.
    """
    if loss == "linear":
        d = np.zeros_like(logits)
        d[label] = -1.0
        return -logits[label], d
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    d = np.exp(shifted - log_z)
    d[label] -= 1.0
    return log_z - shifted[label], d


def loss_and_grads(params: dict, pieces, labels, cfg: ModelConfig, loss: str = "cross_entropy"):
    """Mean loss over ``pieces`` (each a list of window graphs) and its gradients."""
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    total = 0.0
    for piece, label in zip(pieces, labels):
        inputs = _piece_inputs(piece, cfg)
        states, embs = [], []
        for g in inputs:
            emb, state = _encode(g, params, cfg)
            embs.append(emb)
            states.append(state)
        logits, _, cstate = _classify(np.stack(embs), params, cfg)
        value, d_logits = _piece_loss(logits, label, loss)
        if not np.isfinite(value):
            raise FloatingPointError("non-finite loss")
        total += value
        d_emb = _classify_backward(params, cfg, cstate, d_logits / len(pieces), grads)
        for g, state, de in zip(inputs, states, d_emb):
            _encode_backward(g, params, cfg, state, de, grads)
    return total / len(pieces), grads


def predict(params: dict, pieces, cfg: ModelConfig) -> np.ndarray:
    out = []
    for piece in pieces:
        emb = np.stack([encode_window(g, params, cfg) for g in _piece_inputs(piece, cfg)])
        out.append(int(np.argmax(classify_piece(emb, params, cfg)[0])))
    return np.asarray(out)


# -- gradient check -----------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_err: float
    entries_checked: int
    seed: int
    skipped_kinks: int = 0
    worst: tuple = ()

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_err <= tol

    def to_dict(self) -> dict:
        return {"max_rel_err": self.max_rel_err, "entries_checked": self.entries_checked, "seed": self.seed,
                "skipped_kinks": self.skipped_kinks, "worst": list(self.worst)}


def _sample_entries(params, num_entries, rng):
    """Entries per tensor proportional to size, at least two per tensor."""
    total = sum(v.size for v in params.values())
    plan = []
    for name in sorted(params):
        size = params[name].size
        plan.append((name, min(size, max(2, math.ceil(num_entries * size / total)))))
    return plan


ORACLE_DTYPES = {"extended": np.longdouble, "double": np.float64}


class _Oracle:
    """Loss evaluator for finite differences that reuses unperturbed work.

    Perturbing a parameter of SAGE layer ``l`` only recomputes layers
    ``l..N-1`` of each window; projection, attention and classifier
    parameters reuse the cached pooled vectors or embeddings.
    """

    def __init__(self, params, pieces, labels, cfg, dtype, loss):
        self.p = {k: v.astype(dtype) for k, v in params.items()}
        self.cfg = cfg
        self.loss_name = loss
        self.labels = list(labels)
        self.windows = []  # per piece: list of (graph, layer inputs, masks, pooled, emb)
        for piece in pieces:
            rows = []
            for g in piece:
                g = GraphInput(g.x.astype(dtype), g.aggs)
                emb, (cache, pooled) = _encode(g, self.p, cfg)
                rows.append((g, [h for h, _, _ in cache], [z > 0 for _, _, z in cache], pooled, emb))
            self.windows.append(rows)

    def _first_layer(self, name):
        if name.startswith("sage"):
            return int(name[4:name.index(".")])
        if name.startswith("proj."):
            return self.cfg.num_layers
        return None

    def loss(self, name):
        """Loss under the current parameters, and whether a ReLU flipped."""
        cfg, p = self.cfg, self.p
        first = self._first_layer(name)
        total, kink = 0.0, False
        for rows, label in zip(self.windows, self.labels):
            embs = []
            for g, inputs, masks, pooled, emb in rows:
                if first is not None and g.num_nodes:
                    if first < cfg.num_layers:
                        h = inputs[first]
                        for layer in range(first, cfg.num_layers):
                            z = h @ p[f"sage{layer}.w_self"] + p[f"sage{layer}.b"]
                            for r, agg in g.aggs.items():
                                z = z + agg.forward(h) @ p[f"sage{layer}.w_nbr.{r}"]
                            kink |= bool(((z > 0) != masks[layer]).any())
                            h = np.maximum(z, 0)
                        pooled = h.mean(axis=0)
                    emb = pooled @ p["proj.w"] + p["proj.b"]
                embs.append(emb)
            logits = _classify(np.stack(embs), p, cfg)[0]
            total = total + _piece_loss(logits, label, self.loss_name)[0]
        if not np.isfinite(total):
            raise FloatingPointError("non-finite loss")
        return total / len(self.windows), kink


def grad_check(params: dict, pieces, labels, cfg: ModelConfig, loss: str = "cross_entropy",
               eps: float = 1e-5, num_entries: int = 200, seed: int = 0, inject_fault: float | None = None,
               oracle_precision: str = "extended") -> GradCheckReport:
    """Compare analytic gradients with central differences on sampled entries.

    The analytic gradient is computed in float64. The central difference
    ``(f(t + eps) - f(t - eps)) / (2 eps)`` is evaluated in
    ``oracle_precision``: "extended" (long double) keeps rounding noise in
    the loss well below the smallest gradients, "double" uses float64.

    ``loss`` is "cross_entropy" or "linear" (see :func:`loss_and_grads`).
    Relative error per entry is ``|a - n| / max(|a|, |n|, 1e-8)``. Entries
    whose perturbation flips a ReLU are skipped and replaced by another draw
    from the same tensor, since the loss is not differentiable there.
    ``inject_fault`` scales the analytic gradient of the largest-magnitude
    entry by ``1 + inject_fault`` and forces that entry into the sample.
    """
    rng = np.random.default_rng(seed)
    dtype = ORACLE_DTYPES[oracle_precision]
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    pieces = [_piece_inputs(piece, cfg) for piece in pieces]
    _, grads = loss_and_grads(params, pieces, labels, cfg, loss)
    oracle = _Oracle(params, pieces, labels, cfg, dtype, loss)
    forced = []
    if inject_fault is not None:
        name = max(grads, key=lambda k: np.abs(grads[k]).max())
        idx = np.unravel_index(int(np.argmax(np.abs(grads[name]))), grads[name].shape)
        grads[name][idx] *= 1.0 + inject_fault
        forced.append((name, idx))

    def numeric(name, idx):
        p = oracle.p[name]
        old = p[idx]
        p[idx] = old + dtype(eps)
        f_plus, kink_plus = oracle.loss(name)
        p[idx] = old - dtype(eps)
        f_minus, kink_minus = oracle.loss(name)
        p[idx] = old
        if kink_plus or kink_minus:
            return None
        return float((f_plus - f_minus) / (2 * dtype(eps)))

    worst, worst_at, checked, skipped = 0.0, (), 0, 0

    def check(name, idx):
        nonlocal worst, worst_at, checked
        n = numeric(name, idx)
        if n is None:
            return False
        a = float(grads[name][idx])
        err = abs(a - n) / max(abs(a), abs(n), 1e-8)
        checked += 1
        if err > worst:
            worst, worst_at = err, (name, [int(i) for i in idx])
        return True

    for name, idx in forced:
        check(name, idx)
    for name, count in _sample_entries(params, num_entries, rng):
        shape = params[name].shape
        done, attempts = 0, 0
        while done < count and attempts < 20 * count:
            attempts += 1
            idx = np.unravel_index(int(rng.integers(params[name].size)), shape)
            if check(name, idx):
                done += 1
            else:
                skipped += 1
    return GradCheckReport(float(worst), checked, seed, skipped, worst_at)


# -- attention vs adjacency ---------------------------------------------------

def attention_adjacency_correlation(attn, adj) -> float:
    """Pearson r between off-diagonal attention weights and adjacency entries.

    Single pass (Welford co-moment update) over the flattened entries.
    """
    attn = np.asarray(attn, dtype=np.float64)
    adj = np.asarray(adj, dtype=np.float64)
    if attn.shape != adj.shape or attn.ndim != 2 or attn.shape[0] != attn.shape[1]:
        raise ValueError("attention and adjacency must be square matrices of equal shape")
    off = ~np.eye(attn.shape[0], dtype=bool)
    xs, ys = attn[off], adj[off]
    n = 0
    mx = my = sxx = syy = sxy = 0.0
    for x, y in zip(xs.tolist(), ys.tolist()):
        n += 1
        dx = x - mx
        mx += dx / n
        dy = y - my
        my += dy / n
        sxx += dx * (x - mx)
        syy += dy * (y - my)
        sxy += dx * (y - my)
    if n < 2 or sxx <= 0.0 or syy <= 0.0:
        raise ZeroVariance("correlation is undefined for a constant input")
    return sxy / math.sqrt(sxx * syy)


def aggregated_adjacency(graph: NoteGraph) -> np.ndarray:
    """Binary N x N matrix with A[u, v] = 1 if any edge type links u -> v."""
    a = np.zeros((graph.num_nodes, graph.num_nodes))
    for e in graph.edges.values():
        if e.shape[0]:
            a[e[:, 0], e[:, 1]] = 1.0
    return a


# -- training smoke run -------------------------------------------------------

def train(pieces, labels, cfg: ModelConfig, steps: int = 500, lr: float = 1e-2, seed: int = 0,
          params: dict | None = None, stop_at_perfect: bool = True):
    """Full-batch Adam. Returns ``(params, history)`` with per-step loss/accuracy."""
    params = params or init_params(cfg, seed)
    pieces = [_piece_inputs(piece, cfg) for piece in pieces]
    labels = np.asarray(labels)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    s = {k: np.zeros_like(v) for k, v in params.items()}
    b1, b2, tiny = 0.9, 0.999, 1e-8
    history = []
    for step in range(1, steps + 1):
        loss, grads = loss_and_grads(params, pieces, labels, cfg)
        acc = float((predict(params, pieces, cfg) == labels).mean())
        history.append({"step": step, "loss": loss, "accuracy": acc})
        if stop_at_perfect and acc == 1.0:
            break
        for k in params:
            m[k] = b1 * m[k] + (1 - b1) * grads[k]
            s[k] = b2 * s[k] + (1 - b2) * grads[k] ** 2
            m_hat = m[k] / (1 - b1 ** step)
            s_hat = s[k] / (1 - b2 ** step)
            params[k] = params[k] - lr * m_hat / (np.sqrt(s_hat) + tiny)
    return params, history


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(params: dict, cfg: ModelConfig) -> str:
    return json.dumps({
        "config": cfg.to_dict(),
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(params.items())},
    })


def load_checkpoint(text: str):
    data = json.loads(text)
    cfg = ModelConfig(**data["config"])
    params = {k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in data["params"].items()}
    return params, cfg
