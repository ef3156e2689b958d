"""Edge-sampling contrastive objective for encoders trained without a discriminator.

Adjacent vertex pairs are positives, uniformly random pairs are negatives;
the encoder is trained so that embedding dot products rank positives above
negatives.  This is the plain unsupervised alternative to the
corruption-based objective and reuses the same training plumbing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .encoders import GraphContext
from .optim import AdamState, NaNGradient, adam_step


@dataclass
class EdgeContrastConfig:
    epochs: int = 200
    lr: float = 0.001
    seed: int = 0
    max_pairs: int = 4096
    patience: int | None = None


def edge_contrast_step(encoder, ctx, x, pos_pairs, neg_pairs, rng=None):
    """Evaluate the pairwise objective and accumulate encoder gradients.

    loss = mean(softplus(-z_u . z_v)) over positive pairs
         + mean(softplus(+z_u . z_v)) over negative pairs.
    """
    us, vs = pos_pairs
    nu, nv = neg_pairs
    z, tape = encoder.forward(ctx, x, rng=rng)
    pos_logit = np.einsum("nd,nd->n", z[us], z[vs])
    neg_logit = np.einsum("nd,nd->n", z[nu], z[nv])
    loss = float(np.mean(np.logaddexp(0.0, -pos_logit))
                 + np.mean(np.logaddexp(0.0, neg_logit)))
    accuracy = (np.count_nonzero(pos_logit > 0) + np.count_nonzero(neg_logit <= 0)) \
        / (pos_logit.size + neg_logit.size)

    d_pos = -expit(-pos_logit) / pos_logit.size
    d_neg = expit(neg_logit) / neg_logit.size
    dz = np.zeros_like(z)
    np.add.at(dz, us, d_pos[:, None] * z[vs])
    np.add.at(dz, vs, d_pos[:, None] * z[us])
    np.add.at(dz, nu, d_neg[:, None] * z[nv])
    np.add.at(dz, nv, d_neg[:, None] * z[nu])
    encoder.backward(tape, dz)
    return loss, accuracy


def train_edge_contrast(graph, encoder, cfg):
    """Seeded training loop; history rows are (epoch, loss, accuracy)."""
    ctx = GraphContext(graph.adjacency)
    x = graph.features
    adj = graph.adjacency
    entry_rows = adj.entry_rows()
    n = adj.n
    opt = AdamState(encoder.store, lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    history = []
    best = np.inf
    stale = 0
    for epoch in range(cfg.epochs):
        if adj.nnz > cfg.max_pairs:
            chosen = rng.choice(adj.nnz, size=cfg.max_pairs, replace=False)
            pos = (entry_rows[chosen], adj.indices[chosen])
        else:
            pos = (entry_rows, adj.indices)
        count = pos[0].size
        neg = (rng.integers(0, n, size=count), rng.integers(0, n, size=count))
        encoder.store.zero_grads()
        loss, accuracy = edge_contrast_step(encoder, ctx, x, pos, neg, rng=rng)
        if not np.isfinite(loss):
            raise NaNGradient(f"loss became non-finite at epoch {epoch}")
        adam_step(encoder.store, opt)
        history.append((epoch, loss, accuracy))
        if loss < best - 1e-12:
            best = loss
            stale = 0
        else:
            stale += 1
            if cfg.patience is not None and stale > cfg.patience:
                break
    return encoder, history
