"""Independent dense reference implementations used as oracles.

Everything here works on dense numpy adjacency matrices with explicit
per-vertex loops, deliberately sharing no code with the package kernels.
"""

import numpy as np


def dense_normalized(adj_dense):
    a = np.asarray(adj_dense, dtype=float) + np.eye(adj_dense.shape[0])
    deg = a.sum(axis=1)
    d_inv_sqrt = np.diag(1.0 / np.sqrt(deg))
    return d_inv_sqrt @ a @ d_inv_sqrt


def dense_gcn_layer(adj_dense, h, w, relu=False):
    out = dense_normalized(adj_dense) @ h @ w
    return np.maximum(out, 0.0) if relu else out


def dense_sage_layer(adj_dense, h, w, relu=False):
    n = adj_dense.shape[0]
    rows = []
    for v in range(n):
        neighbors = [u for u in range(n) if adj_dense[v, u]]
        if neighbors:
            agg = sum(h[u] for u in neighbors) / len(neighbors)
        else:
            agg = np.zeros(h.shape[1])
        rows.append(np.concatenate([h[v], agg]) @ w)
    out = np.stack(rows)
    return np.maximum(out, 0.0) if relu else out


def dense_gat_layer(adj_dense, h, weights, a_srcs, a_dsts, relu=False,
                    slope=0.2):
    """Multi-head attention with self-loops, python-loop softmax."""
    n = adj_dense.shape[0]
    head_outs = []
    for w, a_src, a_dst in zip(weights, a_srcs, a_dsts):
        wh = h @ w
        out = np.zeros_like(wh)
        for i in range(n):
            neigh = [j for j in range(n) if adj_dense[i, j]] + [i]
            neigh = sorted(set(neigh))
            logits = []
            for j in neigh:
                z = float(a_src @ wh[i] + a_dst @ wh[j])
                logits.append(z if z > 0 else slope * z)
            logits = np.array(logits)
            ex = np.exp(logits - logits.max())
            alpha = ex / ex.sum()
            for a_ij, j in zip(alpha, neigh):
                out[i] += a_ij * wh[j]
        head_outs.append(np.maximum(out, 0.0) if relu else out)
    return np.concatenate(head_outs, axis=1)


def dense_attention_rows(adj_dense, h, w, a_src, a_dst, slope=0.2):
    """Attention coefficients alpha[i][j] per vertex, for one head."""
    n = adj_dense.shape[0]
    wh = h @ w
    alphas = {}
    for i in range(n):
        neigh = sorted(set([j for j in range(n) if adj_dense[i, j]] + [i]))
        logits = []
        for j in neigh:
            z = float(a_src @ wh[i] + a_dst @ wh[j])
            logits.append(z if z > 0 else slope * z)
        logits = np.array(logits)
        ex = np.exp(logits - logits.max())
        alphas[i] = dict(zip(neigh, ex / ex.sum()))
    return alphas
