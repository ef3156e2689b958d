"""Node-embedding encoders: stacked graph layers with explicit backward passes.

Three layer families share one calling convention: ``forward(ctx, h, ...)``
returns ``(out, cache)`` and ``backward(cache, grad_out)`` returns the input
gradient while accumulating parameter gradients into the layer's store.
The explicit cache lets a trainer run two forward passes (e.g. a clean and a
corrupted graph) before backpropagating through either.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .optim import ParamStore
from .sparse import SparseAdjacency, ShapeMismatch, normalize_adjacency, spmm, spmm_t
from .tensorio import load_store, save_store

ENCODER_KINDS = ("gcn", "sage", "gat")
ACTIVATIONS = ("relu", "identity")
LEAKY_SLOPE = 0.2  # attention logit nonlinearity


def _apply_act(name, pre):
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "identity":
        return pre
    raise ValueError(f"unknown activation {name!r}")


def _act_backward(name, pre, grad_out):
    if name == "relu":
        return grad_out * (pre > 0)
    if name == "identity":
        return grad_out
    raise ValueError(f"unknown activation {name!r}")


def glorot(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


class GraphContext:
    """Per-graph tensors shared by all layers, computed lazily once."""

    def __init__(self, adjacency):
        self.adj = adjacency
        self.n = adjacency.n
        self._norm = None
        self._loops = None
        self._loop_centers = None

    @property
    def norm_adj(self):
        if self._norm is None:
            self._norm = normalize_adjacency(self.adj)
        return self._norm

    @property
    def adj_with_self(self):
        if self._loops is None:
            self._loops = self.adj.with_self_loops()
        return self._loops

    @property
    def loop_centers(self):
        if self._loop_centers is None:
            self._loop_centers = self.adj_with_self.entry_rows()
        return self._loop_centers


def mean_aggregation_matrix(adjacency, fanout=None, rng=None):
    """Row-stochastic neighbor-mean operator, optionally fanout-sampled.

    Row i holds 1/k at each of its k (sampled) neighbors; vertices without
    neighbors get an empty row, i.e. a zero aggregate.  Sampling only happens
    when both ``fanout`` and ``rng`` are given; otherwise the full
    neighborhood is used, which is deterministic and seed-independent.
    """
    deg = adjacency.degrees()
    if fanout is not None and rng is not None and np.any(deg > fanout):
        cols = []
        for i in range(adjacency.n):
            row = adjacency.row(i)
            if row.size > fanout:
                row = np.sort(rng.choice(row, size=fanout, replace=False))
            cols.append(row)
        counts = np.minimum(deg, fanout)
        indices = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)])
    else:
        counts = deg
        indices = adjacency.indices
        indptr = adjacency.indptr
    weights = np.repeat(1.0 / np.maximum(counts, 1), counts).astype(np.float64)
    return SparseAdjacency(adjacency.n, indptr, indices, data=weights)


class GcnLayer:
    """Spectral convolution: out = act(norm_adj @ h @ W)."""

    def __init__(self, store, name, in_dim, out_dim, activation, rng):
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.W = store.register(f"{name}/W", glorot(rng, in_dim, out_dim))
        self._gW = store.grad(f"{name}/W")

    def forward(self, ctx, h):
        if h.shape[1] != self.in_dim:
            raise ShapeMismatch(f"{self.name}: expected {self.in_dim} input "
                                f"columns, got {h.shape[1]}")
        s = ctx.norm_adj
        p = spmm(s, h)
        pre = p @ self.W
        return _apply_act(self.activation, pre), {"s": s, "p": p, "pre": pre}

    def backward(self, cache, grad_out):
        dpre = _act_backward(self.activation, cache["pre"], grad_out)
        self._gW += cache["p"].T @ dpre
        dp = dpre @ self.W.T
        return spmm(cache["s"], dp)  # norm_adj is symmetric


class SageLayer:
    """Sampled-neighborhood convolution: out = act(concat(h, mean_N(h)) @ W)."""

    def __init__(self, store, name, in_dim, out_dim, activation, rng):
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.W = store.register(f"{name}/W", glorot(rng, 2 * in_dim, out_dim))
        self._gW = store.grad(f"{name}/W")

    def forward(self, ctx, h, fanout=None, rng=None):
        if h.shape[1] != self.in_dim:
            raise ShapeMismatch(f"{self.name}: expected {self.in_dim} input "
                                f"columns, got {h.shape[1]}")
        m = mean_aggregation_matrix(ctx.adj, fanout=fanout, rng=rng)
        c = np.concatenate([h, spmm(m, h)], axis=1)
        pre = c @ self.W
        return _apply_act(self.activation, pre), {"m": m, "c": c, "pre": pre}

    def backward(self, cache, grad_out):
        dpre = _act_backward(self.activation, cache["pre"], grad_out)
        self._gW += cache["c"].T @ dpre
        dc = dpre @ self.W.T
        dh = dc[:, :self.in_dim].copy()
        dh += spmm_t(cache["m"], dc[:, self.in_dim:])
        return dh


class GatLayer:
    """Multi-head attention convolution over self-inclusive neighborhoods.

    Per head: logits LeakyReLU(a_src . Wh_i + a_dst . Wh_j) are softmaxed
    over j in N(i) (self included), the attention-weighted neighbor sum is
    passed through the activation, and head outputs are concatenated.
    """

    def __init__(self, store, name, in_dim, out_dim, heads, activation, rng):
        if out_dim % heads:
            raise ValueError(f"{name}: output width {out_dim} not divisible "
                             f"by {heads} heads")
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.heads = heads
        self.head_dim = out_dim // heads
        self.activation = activation
        self.W = []
        self.a_src = []
        self.a_dst = []
        self._gW = []
        self._ga_src = []
        self._ga_dst = []
        for k in range(heads):
            base = f"{name}/head{k}"
            self.W.append(store.register(f"{base}/W",
                                         glorot(rng, in_dim, self.head_dim)))
            self.a_src.append(store.register(
                f"{base}/a_src", glorot(rng, self.head_dim, 1, shape=(self.head_dim,))))
            self.a_dst.append(store.register(
                f"{base}/a_dst", glorot(rng, self.head_dim, 1, shape=(self.head_dim,))))
            self._gW.append(store.grad(f"{base}/W"))
            self._ga_src.append(store.grad(f"{base}/a_src"))
            self._ga_dst.append(store.grad(f"{base}/a_dst"))

    def forward(self, ctx, h):
        if h.shape[1] != self.in_dim:
            raise ShapeMismatch(f"{self.name}: expected {self.in_dim} input "
                                f"columns, got {h.shape[1]}")
        loops = ctx.adj_with_self
        centers = ctx.loop_centers
        neigh = loops.indices
        indptr = loops.indptr
        outs = []
        head_caches = []
        for k in range(self.heads):
            wh = h @ self.W[k]
            s = wh @ self.a_src[k]
            t = wh @ self.a_dst[k]
            z = s[centers] + t[neigh]
            e = np.where(z > 0, z, LEAKY_SLOPE * z)
            # rows are never empty thanks to self-loops
            rowmax = np.maximum.reduceat(e, indptr[:-1])
            ex = np.exp(e - rowmax[centers])
            rowsum = np.add.reduceat(ex, indptr[:-1])
            alpha = ex / rowsum[centers]
            att = SparseAdjacency(ctx.n, indptr, neigh, data=alpha)
            pre = spmm(att, wh)
            outs.append(_apply_act(self.activation, pre))
            head_caches.append({"wh": wh, "z": z, "alpha": alpha,
                                "att": att, "pre": pre})
        cache = {"h": h, "centers": centers, "neigh": neigh, "indptr": indptr,
                 "heads": head_caches}
        return np.concatenate(outs, axis=1), cache

    def backward(self, cache, grad_out):
        h = cache["h"]
        centers = cache["centers"]
        neigh = cache["neigh"]
        indptr = cache["indptr"]
        n = h.shape[0]
        dh = np.zeros_like(h)
        for k in range(self.heads):
            hc = cache["heads"][k]
            g = grad_out[:, k * self.head_dim:(k + 1) * self.head_dim]
            dpre = _act_backward(self.activation, hc["pre"], g)
            dwh = spmm_t(hc["att"], dpre)
            # attention coefficient path
            dalpha = np.einsum("ed,ed->e", dpre[centers], hc["wh"][neigh])
            alpha = hc["alpha"]
            rowdot = np.add.reduceat(alpha * dalpha, indptr[:-1])
            de = alpha * (dalpha - rowdot[centers])
            dz = de * np.where(hc["z"] > 0, 1.0, LEAKY_SLOPE)
            ds = np.bincount(centers, weights=dz, minlength=n)
            dt = np.bincount(neigh, weights=dz, minlength=n)
            dwh += np.outer(ds, self.a_src[k]) + np.outer(dt, self.a_dst[k])
            self._ga_src[k] += hc["wh"].T @ ds
            self._ga_dst[k] += hc["wh"].T @ dt
            self._gW[k] += h.T @ dwh
            dh += dwh @ self.W[k].T
        return dh


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture descriptor for a node-embedding stack."""

    kind: str
    num_layers: int = 2
    hidden_dim: int = 128
    out_dim: int = 128
    activation: str = "relu"
    gat_heads: int = 4
    sage_fanout: tuple | None = (25, 10, 10)

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"encoder kind must be one of {ENCODER_KINDS}")
        if self.num_layers not in (1, 2, 3):
            raise ValueError("num_layers must be 1, 2 or 3")
        if self.out_dim != 128:
            raise ValueError("embedding width is fixed at 128")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.hidden_dim <= 0:
            raise ValueError("hidden_dim must be positive")
        if self.kind == "gat" and self.num_layers > 1 \
                and self.hidden_dim % self.gat_heads:
            raise ValueError("hidden_dim must be divisible by gat_heads")


class Encoder:
    """Layer stack built from a config; the final layer is linear.

    Hidden GAT layers use the configured head count; the output layer is
    single-head so the embedding width is exactly ``out_dim``.
    """

    def __init__(self, config, in_dim, seed=0, store=None, layers=None):
        self.config = config
        self.in_dim = in_dim
        self.seed = seed
        self.store = store if store is not None else ParamStore()
        if layers is not None:
            self.layers = list(layers)
            return
        rng = np.random.default_rng(seed)
        self.layers = []
        dim = in_dim
        for i in range(config.num_layers):
            last = i == config.num_layers - 1
            out = config.out_dim if last else config.hidden_dim
            act = "identity" if last else config.activation
            name = f"layer{i}"
            if config.kind == "gcn":
                layer = GcnLayer(self.store, name, dim, out, act, rng)
            elif config.kind == "sage":
                layer = SageLayer(self.store, name, dim, out, act, rng)
            else:
                heads = 1 if last else config.gat_heads
                layer = GatLayer(self.store, name, dim, out, heads, act, rng)
            self.layers.append(layer)
            dim = out

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    def _fanout(self, i, rng):
        if rng is None or self.config.sage_fanout is None:
            return None
        fan = self.config.sage_fanout
        return fan[min(i, len(fan) - 1)]

    def forward(self, ctx, x, rng=None):
        """Run the stack; ``rng=None`` means full neighborhoods everywhere."""
        h = x
        tape = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, SageLayer):
                h, cache = layer.forward(ctx, h, fanout=self._fanout(i, rng), rng=rng)
            else:
                h, cache = layer.forward(ctx, h)
            tape.append(cache)
        return h, tape

    def backward(self, tape, grad_out):
        g = grad_out
        for layer, cache in zip(reversed(self.layers), reversed(tape)):
            g = layer.backward(cache, g)
        return g


def encoder_forward(graph, encoder, rng=None):
    """Embed every vertex of a graph-like object (``adjacency`` + ``features``)."""
    ctx = GraphContext(graph.adjacency)
    z, _ = encoder.forward(ctx, graph.features, rng=rng)
    return z


def gcn_layer_forward(norm_adj, h, w, activation="identity"):
    """Single convolution applied functionally: act(norm_adj @ h @ w)."""
    return _apply_act(activation, spmm(norm_adj, h) @ np.asarray(w))


def sage_layer_forward(adjacency, h, w, fanout=None, rng_seed=None,
                       activation="identity"):
    """Functional mean-aggregator convolution; deterministic given the seed."""
    rng = np.random.default_rng(rng_seed) if rng_seed is not None else None
    m = mean_aggregation_matrix(adjacency, fanout=fanout, rng=rng)
    c = np.concatenate([h, spmm(m, h)], axis=1)
    return _apply_act(activation, c @ np.asarray(w))


def gat_layer_forward(adjacency, h, layer):
    """Run a GatLayer on bare adjacency, discarding the backward cache."""
    out, _ = layer.forward(GraphContext(adjacency), h)
    return out


def save_encoder(dirpath, encoder, extra=None):
    """Checkpoint: config descriptor JSON plus one snapshot per tensor."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    cfg = encoder.config
    descriptor = {
        "kind": cfg.kind,
        "num_layers": cfg.num_layers,
        "hidden_dim": cfg.hidden_dim,
        "out_dim": cfg.out_dim,
        "activation": cfg.activation,
        "gat_heads": cfg.gat_heads,
        "sage_fanout": list(cfg.sage_fanout) if cfg.sage_fanout else None,
        "in_dim": encoder.in_dim,
        "seed": encoder.seed,
    }
    if extra:
        descriptor.update(extra)
    with open(dirpath / "config.json", "w") as fh:
        json.dump(descriptor, fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_store(dirpath, encoder.store)
    return descriptor


def read_descriptor(dirpath):
    with open(Path(dirpath) / "config.json") as fh:
        return json.load(fh)


def encoder_from_descriptor(descriptor):
    """Rebuild a freshly initialized encoder from a checkpoint descriptor."""
    fanout = descriptor["sage_fanout"]
    config = EncoderConfig(
        kind=descriptor["kind"],
        num_layers=descriptor["num_layers"],
        hidden_dim=descriptor["hidden_dim"],
        out_dim=descriptor["out_dim"],
        activation=descriptor["activation"],
        gat_heads=descriptor["gat_heads"],
        sage_fanout=tuple(fanout) if fanout else None,
    )
    return Encoder(config, descriptor["in_dim"], seed=descriptor["seed"])


def load_encoder(dirpath):
    descriptor = read_descriptor(dirpath)
    encoder = encoder_from_descriptor(descriptor)
    load_store(dirpath, encoder.store)
    return encoder, descriptor
