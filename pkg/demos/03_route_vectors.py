#!/usr/bin/env python3
"""Turn node embeddings into regression-ready route vectors, both ways.

Strategy one sums the embeddings of the visited segments (multiplicity
counts).  Strategy two appends one virtual vertex per route to the graph,
connected to the route's members, and reads that vertex's embedding after
re-encoding the extended graph.
"""

import numpy as np

from roadeta.dgi import DgiModel, DgiTrainConfig, embed_nodes, train_dgi
from roadeta.encoders import Encoder, EncoderConfig
from roadeta.roads import TripFilterConfig, filter_trips
from roadeta.routes import (aggregate_sum, augment_route_vector,
                            compute_augment_stats, extend_graph_virtual_nodes,
                            route_vector_layout, virtual_node_embeddings)
from roadeta.synth import (CitySpec, TravelTimeModel, WeatherModel,
                           generate_city, generate_trips)

graph = generate_city(CitySpec(n_segments=400, seed=9))
trips, _ = filter_trips(
    generate_trips(graph, 600, TravelTimeModel(), seed=9,
                   weather=WeatherModel(9)),
    TripFilterConfig())
print(f"{len(trips)} trips after filtering")

print("\n== strategy 1: sum of member embeddings ==")
encoder = Encoder(EncoderConfig(kind="sage", num_layers=2), 44, seed=4)
model = DgiModel(encoder, seed=5)
model, _ = train_dgi(graph, model, DgiTrainConfig(epochs=80, seed=6))
z = embed_nodes(graph, model)
route = trips[0]
summed = aggregate_sum(z, route)
print(f"route of {len(route.nodes)} segments -> vector of {summed.shape[0]},"
      f" |v| = {np.linalg.norm(summed):.2f} (norm grows with route length)")

print("\n== strategy 2: virtual vertex per route ==")
ext = extend_graph_virtual_nodes(graph, trips)
print(f"extended graph: {ext.n_base} real + {ext.n_routes} virtual vertices")
vn_encoder = Encoder(EncoderConfig(kind="sage", num_layers=2), 44, seed=7)
vn_model = DgiModel(vn_encoder, seed=8)
vn_model, _ = train_dgi(ext, vn_model, DgiTrainConfig(epochs=80, seed=9))
vn_rows = virtual_node_embeddings(ext, vn_model.encoder)
print(f"virtual rows: {vn_rows.shape}, |v| = {np.linalg.norm(vn_rows[0]):.2f}"
      " (bounded regardless of route length)")

print("\n== augmentation: calendar, weather and length features ==")
weather = WeatherModel(9)
stats = compute_augment_stats(trips, graph)
vec = augment_route_vector(summed, route, graph, weather, stats)
offset = 0
for name, width in route_vector_layout(128, weather):
    block = vec[offset:offset + width]
    print(f"  {name:<20s} cols {offset:3d}..{offset + width - 1:3d}  "
          f"nonzero {np.count_nonzero(block)}")
    offset += width
