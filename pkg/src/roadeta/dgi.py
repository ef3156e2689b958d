"""Unsupervised encoder training against a corrupted-graph discriminator.

A seeded feature-row shuffle produces the negative graph; a bilinear
discriminator scores every vertex embedding against a pooled summary of the
clean embeddings, and the encoder is trained to make real vertices score
high and shuffled ones score low.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .encoders import GraphContext, encoder_forward, encoder_from_descriptor, \
    glorot, read_descriptor, save_encoder
from .optim import AdamState, NaNGradient, adam_step
from .tensorio import load_store

SCORE_EPS = 1e-7  # probability clamp applied before logs

LOSS_HISTORY_HEADER = ("epoch", "loss", "discriminator_accuracy")


def corrupt_features(x, seed):
    """Shuffle feature rows with a seeded permutation; adjacency untouched."""
    rng = np.random.default_rng(seed)
    return x[rng.permutation(x.shape[0])]


def readout_summary(embeddings):
    """Graph summary: componentwise logistic of the vertex-mean embedding."""
    return expit(np.mean(embeddings, axis=0))


def discriminator_score(d, t, w_d):
    """Bilinear probability logistic(d @ w_d @ t) in (0, 1)."""
    return float(expit(np.asarray(d) @ np.asarray(w_d) @ np.asarray(t)))


def dgi_loss(real_scores, corrupt_scores):
    """Negative log objective, normalized over all N + M scores.

    Scores are clamped to [1e-7, 1 - 1e-7] before the logs, so the value is
    finite and non-negative, approaching zero only at perfect separation.
    """
    p = np.clip(np.asarray(real_scores, dtype=np.float64), SCORE_EPS, 1.0 - SCORE_EPS)
    q = np.clip(np.asarray(corrupt_scores, dtype=np.float64), SCORE_EPS, 1.0 - SCORE_EPS)
    total = np.sum(np.log(p)) + np.sum(np.log1p(-q))
    return float(-total / (p.size + q.size))


class DgiModel:
    """Encoder plus square bilinear discriminator in one parameter store."""

    def __init__(self, encoder, seed=0):
        self.encoder = encoder
        self.seed = seed
        d = encoder.out_dim
        rng = np.random.default_rng(seed)
        self.w_d = encoder.store.register("discriminator/W", glorot(rng, d, d))
        self._gw = encoder.store.grad("discriminator/W")

    @property
    def store(self):
        return self.encoder.store


@dataclass
class DgiTrainConfig:
    epochs: int = 200
    lr: float = 0.001
    seed: int = 0
    patience: int | None = None


def dgi_step_grads(model, ctx, x, corruption_seed, rng=None):
    """One full objective evaluation with gradient accumulation.

    Embeds the clean and the corrupted graph, scores all n vertices of each
    against the clean summary, and backpropagates through discriminator and
    encoder.  Returns (loss, discriminator accuracy).
    """
    encoder = model.encoder
    z_real, tape_real = encoder.forward(ctx, x, rng=rng)
    x_corrupt = corrupt_features(x, corruption_seed)
    z_corr, tape_corr = encoder.forward(ctx, x_corrupt, rng=rng)
    n = z_real.shape[0]

    t = readout_summary(z_real)
    u = model.w_d @ t
    p = expit(z_real @ u)
    q = expit(z_corr @ u)
    loss = dgi_loss(p, q)
    accuracy = (np.count_nonzero(p > 0.5) + np.count_nonzero(q <= 0.5)) / (2.0 * n)

    c = 1.0 / (p.size + q.size)
    in_p = (p > SCORE_EPS) & (p < 1.0 - SCORE_EPS)
    in_q = (q > SCORE_EPS) & (q < 1.0 - SCORE_EPS)
    d_logit_real = np.where(in_p, -c * (1.0 - p), 0.0)
    d_logit_corr = np.where(in_q, c * q, 0.0)

    du = z_real.T @ d_logit_real + z_corr.T @ d_logit_corr
    model._gw += np.outer(du, t)
    dt = model.w_d.T @ du
    dz_real = d_logit_real[:, None] * u + (dt * t * (1.0 - t))[None, :] / n
    dz_corr = d_logit_corr[:, None] * u
    encoder.backward(tape_corr, dz_corr)
    encoder.backward(tape_real, dz_real)
    return loss, accuracy


def train_dgi(graph, model, cfg):
    """Full-batch training loop; deterministic for a fixed seed.

    Each epoch draws a fresh corruption permutation from the seeded stream,
    takes one Adam step, and records (epoch, loss, accuracy).  Stops early
    when the loss has not improved for ``cfg.patience`` epochs.
    """
    ctx = GraphContext(graph.adjacency)
    x = graph.features
    opt = AdamState(model.store, lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    history = []
    best = np.inf
    stale = 0
    for epoch in range(cfg.epochs):
        corruption_seed = int(rng.integers(0, 2 ** 62))
        model.store.zero_grads()
        loss, accuracy = dgi_step_grads(model, ctx, x, corruption_seed, rng=rng)
        if not np.isfinite(loss):
            raise NaNGradient(f"loss became non-finite at epoch {epoch}")
        adam_step(model.store, opt)
        history.append((epoch, loss, accuracy))
        if loss < best - 1e-12:
            best = loss
            stale = 0
        else:
            stale += 1
            if cfg.patience is not None and stale > cfg.patience:
                break
    return model, history


def embed_nodes(graph, model):
    """Deterministic embedding pass: full neighborhoods, no sampling."""
    encoder = model.encoder if isinstance(model, DgiModel) else model
    return encoder_forward(graph, encoder, rng=None)


def write_loss_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOSS_HISTORY_HEADER)
        for epoch, loss, accuracy in history:
            writer.writerow([epoch, repr(float(loss)), repr(float(accuracy))])


def save_dgi(dirpath, model):
    save_encoder(dirpath, model.encoder,
                 extra={"model": "dgi", "dgi_seed": model.seed})


def load_dgi(dirpath):
    descriptor = read_descriptor(dirpath)
    encoder = encoder_from_descriptor(descriptor)
    model = DgiModel(encoder, seed=descriptor.get("dgi_seed", 0))
    load_store(Path(dirpath), model.store)
    return model, descriptor
