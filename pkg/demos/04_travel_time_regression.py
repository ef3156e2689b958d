#!/usr/bin/env python3
"""Train the travel-time regressor on summed embeddings and evaluate it.

Shows the chronological split, minibatch training with best-on-validation
selection, the three error metrics, and a text error histogram.
"""

import numpy as np

from roadeta.dgi import DgiModel, DgiTrainConfig, embed_nodes, train_dgi
from roadeta.encoders import Encoder, EncoderConfig
from roadeta.regression import (MlpConfig, SplitSpec, compute_metrics,
                                conditioned_mlp, error_histogram, mlp_forward,
                                split_dataset, train_regressor)
from roadeta.roads import TripFilterConfig, filter_trips
from roadeta.routes import assemble_route_dataset, compute_augment_stats, \
    sum_route_embeddings
from roadeta.synth import (CitySpec, TravelTimeModel, WeatherModel,
                           generate_city, generate_trips)

graph = generate_city(CitySpec(n_segments=600, seed=3))
weather = WeatherModel(3)
trips, _ = filter_trips(
    generate_trips(graph, 4000, TravelTimeModel(), seed=3, weather=weather),
    TripFilterConfig())

train_trips, val_trips, test_trips = split_dataset(
    trips, SplitSpec(train_count=len(trips) * 5 // 6))
print(f"split: {len(train_trips)} train / {len(val_trips)} val / "
      f"{len(test_trips)} test")

print("\n== embeddings ==")
encoder = Encoder(EncoderConfig(kind="sage", num_layers=2), 44, seed=1)
model = DgiModel(encoder, seed=2)
model, history = train_dgi(graph, model, DgiTrainConfig(epochs=120, seed=3))
print(f"final discriminator accuracy {history[-1][2]:.3f}")
z = embed_nodes(graph, model)

stats = compute_augment_stats(train_trips, graph)
blocks = sum_route_embeddings(z, trips)
x, y = assemble_route_dataset(blocks, trips, graph, weather, stats)
n_tr, n_va = len(train_trips), len(val_trips)

print("\n== regressor ==")
mlp = conditioned_mlp(MlpConfig(x.shape[1]), x[:n_tr], y[:n_tr], seed=4)
mlp, curves = train_regressor((x[:n_tr], y[:n_tr]),
                              (x[n_tr:n_tr + n_va], y[n_tr:n_tr + n_va]),
                              mlp, epochs=40, seed=5)
for epoch, mse, mae in curves[:: max(1, len(curves) // 8)]:
    print(f"epoch {epoch:3d}  train MSE {mse:10.1f}  val MAE {mae:7.2f} s")

pred = mlp_forward(mlp, x[n_tr + n_va:])
report = compute_metrics(y[n_tr + n_va:], pred)
print(f"\ntest: MAE {report.mae_s:.2f} s  RMSE {report.rmse_s:.2f} s  "
      f"MAPE {report.mape_pct:.2f} %  (n={report.count})")

print("\n== signed error distribution (prediction - truth) ==")
hist = error_histogram(y[n_tr + n_va:], pred, bin_width_s=60.0)
peak = hist.counts.max()
for left, count in zip(hist.bin_edges[:-1], hist.counts):
    bar = "#" * int(50 * count / peak)
    print(f"  [{left:7.0f} s, {left + 60:7.0f} s)  {count:5d} {bar}")
