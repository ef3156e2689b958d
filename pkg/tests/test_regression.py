import numpy as np
import pytest

from roadeta.gradcheck import finite_difference_check
from roadeta.regression import (Histogram, InsufficientData, LengthMismatch,
                                MetricsReport, Mlp, MlpConfig, NaNLoss,
                                SplitSpec, ZeroTarget, compute_metrics,
                                error_histogram, load_mlp, mlp_forward,
                                save_mlp, split_dataset, train_regressor)


def brute_force_metrics(y, y_pred):
    """Independent loop-based oracle for the three error metrics."""
    n = len(y)
    abs_sum = 0.0
    sq_sum = 0.0
    pct_sum = 0.0
    for i in range(n):
        diff = y[i] - y_pred[i]
        abs_sum += abs(diff)
        sq_sum += diff * diff
        pct_sum += abs(diff / y[i])
    return abs_sum / n, (sq_sum / n) ** 0.5, 100.0 * pct_sum / n


# ---------------------------------------------------------------------- split

def test_split_paper_scale_counts():
    items = list(range(120_000))
    train, val, test = split_dataset(items, SplitSpec(100_000))
    assert (len(train), len(val), len(test)) == (100_000, 10_000, 10_000)
    assert train[-1] == 99_999 and val[0] == 100_000 and test[-1] == 119_999


def test_split_small_case():
    train, val, test = split_dataset(list(range(10)), SplitSpec(8))
    assert (len(train), len(val), len(test)) == (8, 1, 1)


def test_split_odd_remainder_goes_to_val():
    train, val, test = split_dataset(list(range(11)), SplitSpec(8))
    assert (len(val), len(test)) == (2, 1)


def test_split_insufficient_data():
    with pytest.raises(InsufficientData):
        split_dataset(list(range(10)), SplitSpec(10))
    with pytest.raises(InsufficientData):
        split_dataset(list(range(10)), SplitSpec(9))


def test_split_is_partition():
    items = list(range(37))
    train, val, test = split_dataset(items, SplitSpec(20))
    assert train + val + test == items


# ------------------------------------------------------------------------ MLP

def test_mlp_zero_weights_zero_predictions():
    mlp = Mlp(MlpConfig(input_dim=4, hidden=(3,)), seed=0)
    for name in mlp.store.names():
        mlp.store.param(name)[...] = 0.0
    pred = mlp_forward(mlp, np.random.default_rng(0).normal(size=(5, 4)))
    assert np.array_equal(pred, np.zeros(5))


def test_mlp_single_linear_layer_hand_example():
    mlp = Mlp(MlpConfig(input_dim=2, hidden=()), seed=0)
    mlp.weights[0][...] = np.array([[2.0], [3.0]])
    mlp.biases[0][...] = np.array([1.0])
    pred = mlp_forward(mlp, np.array([[1.0, 1.0], [2.0, 0.0]]))
    assert np.array_equal(pred, [6.0, 5.0])


def test_mlp_shape_check():
    mlp = Mlp(MlpConfig(input_dim=4), seed=0)
    with pytest.raises(LengthMismatch):
        mlp_forward(mlp, np.zeros((3, 5)))


def test_mlp_finite_difference():
    rng = np.random.default_rng(1)
    mlp = Mlp(MlpConfig(input_dim=5, hidden=(7, 3)), seed=2)
    x = rng.normal(size=(6, 5))
    y = rng.normal(size=6)

    def loss_and_grad():
        pred, tape = mlp.forward(x)
        diff = pred - y
        mlp.backward(tape, 2.0 * diff / y.size)
        return float(np.mean(diff * diff))

    assert finite_difference_check(loss_and_grad, mlp.store, eps=1e-6,
                                   max_coords=40) < 1e-6


def test_output_bias_initialization():
    mlp = Mlp(MlpConfig(input_dim=3), seed=0, output_bias=123.0)
    assert mlp.biases[-1][0] == 123.0


# ------------------------------------------------------------------- training

def linear_fixture(n=2000, dim=10, noise=1.0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, dim))
    w = 3.0 * rng.normal(size=dim)
    y = 200.0 + x @ w + rng.normal(0.0, noise, size=n)
    return x, y


def test_train_lr_zero_keeps_parameters():
    x, y = linear_fixture(200)
    mlp = Mlp(MlpConfig(input_dim=10, hidden=(8,)), seed=1)
    before = mlp.store.state_dict()
    train_regressor((x[:150], y[:150]), (x[150:], y[150:]), mlp, epochs=3,
                    lr=0.0, batch_size=32, seed=2)
    for name, value in mlp.store.state_dict().items():
        assert np.array_equal(value, before[name])


def test_train_recovers_linear_target():
    x, y = linear_fixture()
    split = 1600
    mlp = Mlp(MlpConfig(input_dim=10, hidden=(32, 16)), seed=3,
              output_bias=float(np.mean(y[:split])))
    mlp, curves = train_regressor((x[:split], y[:split]),
                                  (x[split:], y[split:]), mlp, epochs=200,
                                  lr=0.001, batch_size=256, seed=4)
    best_mae = min(c[2] for c in curves)
    noise_scale = 1.0
    assert best_mae < 2.0 * noise_scale

    # beats the predict-train-mean baseline by at least half
    baseline = float(np.mean(np.abs(np.mean(y[:split]) - y[split:])))
    assert best_mae < 0.5 * baseline


def test_train_curves_deterministic():
    x, y = linear_fixture(300)

    def run():
        mlp = Mlp(MlpConfig(input_dim=10, hidden=(8,)), seed=5)
        _, curves = train_regressor((x[:250], y[:250]), (x[250:], y[250:]),
                                    mlp, epochs=5, lr=0.001, batch_size=64,
                                    seed=6)
        return curves

    assert run() == run()


def test_train_returns_best_validation_state():
    x, y = linear_fixture(400)
    mlp = Mlp(MlpConfig(input_dim=10, hidden=(8,)), seed=7,
              output_bias=float(np.mean(y[:300])))
    mlp, curves = train_regressor((x[:300], y[:300]), (x[300:], y[300:]),
                                  mlp, epochs=20, lr=0.001, batch_size=64,
                                  seed=8)
    final_mae = float(np.mean(np.abs(mlp_forward(mlp, x[300:]) - y[300:])))
    assert final_mae == pytest.approx(min(c[2] for c in curves), rel=1e-9)


def test_nan_input_raises():
    x = np.full((32, 3), np.nan)
    y = np.ones(32)
    mlp = Mlp(MlpConfig(input_dim=3, hidden=(4,)), seed=9)
    with pytest.raises(NaNLoss):
        train_regressor((x, y), (x, y), mlp, epochs=1, lr=0.001,
                        batch_size=16, seed=10)


# -------------------------------------------------------------------- metrics

def test_metrics_identity():
    y = np.array([10.0, 20.0, 30.0])
    report = compute_metrics(y, y.copy())
    assert (report.mae_s, report.rmse_s, report.mape_pct) == (0.0, 0.0, 0.0)
    assert report.count == 3


def test_metrics_hand_example():
    report = compute_metrics(np.array([100.0, 200.0]), np.array([110.0, 180.0]))
    assert report.mae_s == pytest.approx(15.0, abs=1e-12)
    assert report.rmse_s == pytest.approx(np.sqrt(250.0), abs=1e-12)
    assert report.rmse_s == pytest.approx(15.8113883, abs=1e-6)
    assert report.mape_pct == pytest.approx(10.0, abs=1e-12)


def test_metrics_single_total_miss():
    report = compute_metrics(np.array([100.0]), np.array([0.0]))
    assert (report.mae_s, report.rmse_s, report.mape_pct) == (100.0, 100.0, 100.0)


def test_metrics_errors():
    with pytest.raises(ZeroTarget):
        compute_metrics(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(LengthMismatch):
        compute_metrics(np.array([1.0]), np.array([1.0, 2.0]))


def test_metrics_match_brute_force_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 50))
        y = rng.uniform(1.0, 1000.0, size=n)
        y_pred = y + rng.normal(0.0, 50.0, size=n)
        report = compute_metrics(y, y_pred)
        mae, rmse, mape = brute_force_metrics(y.tolist(), y_pred.tolist())
        assert abs(report.mae_s - mae) < 1e-10
        assert abs(report.rmse_s - rmse) < 1e-10
        assert abs(report.mape_pct - mape) < 1e-10


def test_metrics_rmse_dominates_mae_and_permutation_invariant():
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        y = rng.uniform(1.0, 500.0, size=n)
        y_pred = y + rng.normal(0.0, 20.0, size=n)
        report = compute_metrics(y, y_pred)
        assert report.rmse_s >= report.mae_s - 1e-12
        perm = rng.permutation(n)
        shuffled = compute_metrics(y[perm], y_pred[perm])
        assert shuffled.mae_s == pytest.approx(report.mae_s)
        assert shuffled.rmse_s == pytest.approx(report.rmse_s)
        assert shuffled.mape_pct == pytest.approx(report.mape_pct)


# ------------------------------------------------------------------ histogram

def test_histogram_perfect_predictions_single_bin():
    y = np.full(9, 50.0)
    hist = error_histogram(y, y, 10.0)
    assert hist.counts.tolist() == [9]
    assert hist.bin_edges.tolist() == [0.0, 10.0]


def test_histogram_hand_binning():
    y = np.array([100.0, 100.0])
    y_pred = np.array([95.0, 105.0])  # errors -5 and +5
    hist = error_histogram(y, y_pred, 10.0)
    assert hist.bin_edges.tolist() == [-10.0, 0.0, 10.0]
    assert hist.counts.tolist() == [1, 1]


def test_histogram_counts_conserved():
    rng = np.random.default_rng(13)
    y = rng.uniform(10, 100, size=500)
    y_pred = y + rng.normal(0, 30, size=500)
    hist = error_histogram(y, y_pred, 7.5)
    assert hist.counts.sum() == 500


def test_histogram_rejects_bad_width():
    with pytest.raises(ValueError):
        error_histogram(np.ones(3), np.ones(3), 0.0)


# ----------------------------------------------------------------- checkpoint

def test_mlp_checkpoint_round_trip(tmp_path):
    x, y = linear_fixture(100)
    mlp = Mlp(MlpConfig(input_dim=10, hidden=(6,)), seed=14, output_bias=1.5)
    save_mlp(tmp_path / "mlp", mlp)
    loaded = load_mlp(tmp_path / "mlp")
    assert np.array_equal(mlp_forward(loaded, x), mlp_forward(mlp, x))
