#!/usr/bin/env python3
"""Train node embeddings unsupervised and watch the discriminator learn.

The corruption objective shuffles the feature rows of the graph and trains
a bilinear discriminator to tell clean vertices from shuffled ones against
a pooled summary vector; the encoder improves because better embeddings
make that discrimination easier.
"""

import numpy as np

from roadeta.dgi import DgiModel, DgiTrainConfig, embed_nodes, train_dgi
from roadeta.encoders import Encoder, EncoderConfig
from roadeta.synth import CitySpec, TravelTimeModel, generate_city

graph = generate_city(CitySpec(n_segments=500, seed=7))

print("== corruption-discriminator training, 2-layer GraphSAGE encoder ==")
encoder = Encoder(EncoderConfig(kind="sage", num_layers=2), 44, seed=1)
model = DgiModel(encoder, seed=2)
model, history = train_dgi(graph, model, DgiTrainConfig(epochs=120, seed=3))

for epoch, loss, acc in history[:: max(1, len(history) // 10)]:
    bar = "#" * int(40 * acc)
    print(f"epoch {epoch:4d}  loss {loss:.4f}  disc acc {acc:.3f} {bar}")

z = embed_nodes(graph, model)
print(f"\nembedding matrix: {z.shape}, mean |z| = {np.abs(z).mean():.3f}")

print("\n== nearest segments in embedding space share attributes ==")
probe = 42
distance = np.linalg.norm(z - z[probe], axis=1)
for idx in np.argsort(distance)[:5]:
    seg = graph.raw_segments[idx]
    print(f"  segment {idx:4d}  d={distance[idx]:8.3f}  "
          f"{seg.road_class:<22s} {seg.def_speed_kmh:2d} km/h "
          f"{seg.length_m:7.1f} m")
