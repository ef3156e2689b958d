#!/usr/bin/env python3
"""Generate a synthetic city, write the dataset files, inspect statistics.

The generator emits exactly the CSV/JSONL formats the loaders validate, so
everything downstream can be demonstrated without any external data.
"""

from pathlib import Path

from roadeta.roads import TripFilterConfig, dataset_stats, filter_trips, \
    load_graph, load_trips
from roadeta.synth import CitySpec, TravelTimeModel, WeatherModel, \
    generate_city, generate_trips

OUT = Path("demo_output/city")

print("== generating a 500-segment city with 2000 trips (seed 7) ==")
graph = generate_city(CitySpec(n_segments=500, seed=7), out_dir=OUT)
trips = generate_trips(graph, 2000, TravelTimeModel(), seed=7,
                       path=OUT / "trips.jsonl", weather=WeatherModel(7))
print(f"wrote {OUT}/nodes.csv, edges.csv, trips.jsonl")

print("\n== reloading through the validating loaders ==")
graph = load_graph(OUT / "nodes.csv", OUT / "edges.csv")
trips = load_trips(OUT / "trips.jsonl", graph)
report = dataset_stats(graph, trips)
print(f"vertices            : {report.n_vertices}")
print(f"adjacency entries   : {report.adjacency_entries}")
print(f"trips               : {report.n_trips}")
print(f"trip coverage       : {report.trip_coverage:.3f}")
print(f"vertex usage median : {report.vertex_usage_median}")

print("\n== filtering rebuilt and anomalously short/long trips ==")
kept, rejected = filter_trips(trips, TripFilterConfig())
print(f"kept {len(kept)} of {len(trips)}")
for reason in {r for _, r in rejected}:
    count = sum(1 for _, r in rejected if r is reason)
    print(f"  rejected {count:4d} for {reason.value}")

durations = sorted(t.real_time_of_arrival_s for t in kept)
print("\nduration quartiles (s):",
      [round(durations[int(q * (len(durations) - 1))]) for q in (0, .25, .5, .75, 1)])
