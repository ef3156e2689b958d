import numpy as np
import pytest
from scipy.special import expit

from roadeta.dgi import (DgiModel, DgiTrainConfig, corrupt_features, dgi_loss,
                         dgi_step_grads, discriminator_score, embed_nodes,
                         load_dgi, readout_summary, save_dgi, train_dgi)
from roadeta.encoders import Encoder, EncoderConfig, GraphContext
from roadeta.gradcheck import finite_difference_check
from roadeta.sparse import SparseAdjacency

from conftest import GraphBox, random_graph, two_community_graph


def small_model(kind="gcn", in_dim=8, seed=5, layers=2, hidden=16):
    encoder = Encoder(EncoderConfig(kind=kind, num_layers=layers,
                                    hidden_dim=hidden), in_dim, seed=seed)
    return DgiModel(encoder, seed=seed + 1)


# ------------------------------------------------------------------ corruption

def test_corrupt_single_row_unchanged():
    x = np.array([[1.0, 2.0, 3.0]])
    assert np.array_equal(corrupt_features(x, seed=4), x)


def test_corrupt_preserves_column_sums_and_row_multiset():
    x = np.random.default_rng(0).normal(size=(10, 6))
    xc = corrupt_features(x, seed=1)
    assert np.array_equal(np.sum(xc, axis=0), np.sum(x, axis=0)) or \
        np.allclose(np.sum(xc, axis=0), np.sum(x, axis=0))
    assert sorted(map(tuple, xc)) == sorted(map(tuple, x))


def test_corrupt_deterministic():
    x = np.random.default_rng(2).normal(size=(20, 4))
    assert np.array_equal(corrupt_features(x, seed=9), corrupt_features(x, seed=9))


def test_corrupt_actually_shuffles():
    x = np.arange(40, dtype=float).reshape(20, 2)
    assert not np.array_equal(corrupt_features(x, seed=3), x)


# --------------------------------------------------------------------- readout

def test_readout_zeros_is_half():
    assert np.allclose(readout_summary(np.zeros((5, 128))), 0.5)


def test_readout_single_row():
    row = np.random.default_rng(1).normal(size=(1, 128))
    assert np.allclose(readout_summary(row), expit(row[0]))


def test_readout_matches_scripted_oracle():
    z = np.random.default_rng(2).normal(size=(4, 128))
    # independent mean-then-logistic computation
    mean = np.array([sum(z[i][j] for i in range(4)) / 4.0 for j in range(128)])
    expected = 1.0 / (1.0 + np.exp(-mean))
    assert np.max(np.abs(readout_summary(z) - expected)) < 1e-12


def test_readout_range():
    z = np.random.default_rng(3).normal(size=(6, 128)) * 10
    t = readout_summary(z)
    assert np.all(t > 0) and np.all(t < 1)


# --------------------------------------------------------------- discriminator

def test_discriminator_zero_weight_is_half():
    d = np.ones(128)
    t = np.ones(128)
    assert discriminator_score(d, t, np.zeros((128, 128))) == 0.5


def test_discriminator_unit_vectors_identity_weight():
    d = np.zeros(128)
    t = np.zeros(128)
    d[0] = t[0] = 1.0
    score = discriminator_score(d, t, np.eye(128))
    assert score == pytest.approx(0.7310585786300049, abs=1e-12)


def test_discriminator_bilinear_transpose_identity():
    rng = np.random.default_rng(4)
    d, t = rng.normal(size=128), rng.normal(size=128)
    w = rng.normal(size=(128, 128))
    assert discriminator_score(d, t, w) == pytest.approx(
        discriminator_score(t, d, w.T), abs=1e-12)


# ------------------------------------------------------------------------ loss

def test_loss_all_half_is_ln2():
    for n, m in [(1, 1), (3, 5), (10, 10)]:
        loss = dgi_loss(np.full(n, 0.5), np.full(m, 0.5))
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)


def test_loss_perfect_separation_limit():
    eps = 1e-9
    loss = dgi_loss(np.full(4, 1.0 - eps), np.full(4, eps))
    assert 0 <= loss < 1e-6


def test_loss_hand_example():
    loss = dgi_loss(np.array([0.9]), np.array([0.1]))
    assert loss == pytest.approx(0.10536051565782628, abs=1e-12)
    assert loss == pytest.approx(-np.log(0.9), abs=1e-12)


def test_loss_nonnegative_and_clamped():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = rng.uniform(0, 1, size=8)
        q = rng.uniform(0, 1, size=8)
        assert dgi_loss(p, q) >= 0
    assert np.isfinite(dgi_loss(np.array([0.0, 1.0]), np.array([0.0, 1.0])))


# -------------------------------------------------------------------- training

def test_train_lr_zero_keeps_parameters():
    graph = two_community_graph(40, seed=1)
    model = small_model()
    before = model.store.state_dict()
    model, history = train_dgi(graph, model, DgiTrainConfig(epochs=5, lr=0.0, seed=2))
    for name, value in model.store.state_dict().items():
        assert np.array_equal(value, before[name]), name
    assert len(history) == 5


def test_train_two_community_separates():
    graph = two_community_graph(200, seed=1)
    model = small_model(in_dim=8, hidden=64)
    model, history = train_dgi(graph, model, DgiTrainConfig(epochs=200, seed=7))
    assert history[-1][2] > 0.9
    assert history[-1][1] < history[0][1]


def test_train_bitwise_reproducible():
    def run():
        graph = two_community_graph(30, seed=3)
        model = small_model(seed=9)
        model, history = train_dgi(graph, model,
                                   DgiTrainConfig(epochs=10, seed=11))
        return model.store.state_dict(), history

    state_a, hist_a = run()
    state_b, hist_b = run()
    assert hist_a == hist_b
    for name in state_a:
        assert np.array_equal(state_a[name], state_b[name]), name


def test_sage_training_with_sampling_reproducible():
    graph = two_community_graph(30, seed=4)

    def run():
        encoder = Encoder(EncoderConfig(kind="sage", num_layers=2,
                                        hidden_dim=16, sage_fanout=(3, 3)),
                          8, seed=2)
        model = DgiModel(encoder, seed=3)
        model, history = train_dgi(graph, model,
                                   DgiTrainConfig(epochs=8, seed=5))
        return history

    assert run() == run()


# ---------------------------------------------------------- embed and persist

def test_embed_nodes_shape_and_determinism():
    graph = two_community_graph(30, seed=6)
    model = small_model()
    z1 = embed_nodes(graph, model)
    z2 = embed_nodes(graph, model)
    assert z1.shape == (30, 128)
    assert np.array_equal(z1, z2)


def test_embed_accepts_bare_encoder():
    graph = two_community_graph(20, seed=7)
    encoder = Encoder(EncoderConfig(kind="gcn"), 8, seed=1)
    assert embed_nodes(graph, encoder).shape == (20, 128)


def test_dgi_checkpoint_round_trip(tmp_path):
    graph = two_community_graph(20, seed=8)
    model = small_model(kind="sage", seed=13)
    z = embed_nodes(graph, model)
    save_dgi(tmp_path / "ckpt", model)
    loaded, descriptor = load_dgi(tmp_path / "ckpt")
    assert descriptor["model"] == "dgi"
    z2 = embed_nodes(graph, loaded)
    assert np.max(np.abs(z2 - z)) < 1e-6
    assert np.array_equal(loaded.w_d, model.w_d)


# ------------------------------------------------------------- gradient check

@pytest.mark.parametrize("kind", ["gcn", "sage", "gat"])
def test_full_pipeline_finite_difference(kind):
    rng = np.random.default_rng(20)
    adj = random_graph(6, 0.5, seed=21)
    x = rng.normal(size=(6, 5))
    encoder = Encoder(EncoderConfig(kind=kind, num_layers=2, hidden_dim=8),
                      5, seed=22)
    model = DgiModel(encoder, seed=23)
    ctx = GraphContext(adj)

    def loss_and_grad():
        return dgi_step_grads(model, ctx, x, corruption_seed=31)[0]

    err = finite_difference_check(loss_and_grad, model.store, eps=1e-6,
                                  max_coords=30)
    assert err < 1e-4
