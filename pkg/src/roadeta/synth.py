"""Deterministic synthetic city: grid-with-shortcuts road graph plus trip logs.

The ground-truth travel-time process is multiplicative: per-segment base
time (length over speed limit) scaled by an hour-of-day congestion factor,
a weather factor and lognormal noise.  Topology and segment attributes are
therefore genuinely informative for the downstream regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from .roads import (DEF_SPEEDS, LANES, ROAD_CLASSES, STYLES, RoadGraph,
                    SegmentFeatures, Trip, compute_norm_stats, encode_features,
                    save_graph, save_trips)
from .sparse import SparseAdjacency

WEATHER_CATEGORIES = ("clear", "rain", "snow", "fog")
WEATHER_PROBS = (0.65, 0.18, 0.10, 0.07)

DEFAULT_WEATHER_MULTIPLIERS = (1.0, 1.15, 1.35, 1.2)
DEFAULT_HOUR_MULTIPLIERS = (
    0.80, 0.75, 0.72, 0.72, 0.75, 0.85,   # night into early morning
    1.00, 1.35, 1.50, 1.30, 1.10, 1.05,   # morning rush
    1.10, 1.10, 1.15, 1.25, 1.40, 1.55,   # afternoon into evening rush
    1.45, 1.20, 1.00, 0.95, 0.90, 0.85,
)

#: Trip log window start (2020-12-01T00:00:00Z); one month of timestamps.
TRIP_WINDOW_START = 1_606_780_800
TRIP_WINDOW_DAYS = 31

# class name -> (sampling prob, mean log-length, speed choices, lane choices)
_CLASS_TABLE = {
    "fake road":              (0.01, math.log(60.0), (15, 20), (0, 1)),
    "intra-quarter driveway": (0.18, math.log(80.0), (15, 20), (1, 2)),
    "dirt road":              (0.05, math.log(200.0), (3, 15), (0, 1)),
    "other city street":      (0.30, math.log(150.0), (20, 60), (1, 2, 3)),
    "main city street":       (0.20, math.log(250.0), (60,), (2, 3, 4)),
    "highway":                (0.10, math.log(500.0), (60, 90), (2, 3, 4, 5)),
    "intercity road":         (0.05, math.log(800.0), (60, 90), (1, 2, 3)),
    "federal highway":        (0.03, math.log(1000.0), (90,), (2, 3, 4, 5)),
    "cycle path":             (0.03, math.log(120.0), (15,), (0, 1)),
    "walkway":                (0.05, math.log(80.0), (3,), (0,)),
}
_STYLE_PROBS = {
    "undefined": 0.03, "archway": 0.005, "crosswalk": 0.04, "stairway": 0.005,
    "bridge": 0.04, "overground way": 0.01, "invisible": 0.005, "normal": 0.755,
    "park path": 0.02, "park footpath": 0.01, "subway": 0.005,
    "pedestrian bridge": 0.01, "underground way": 0.005, "tunnel": 0.02,
    "living zone": 0.03, "ford": 0.005,
}


class WeatherModel:
    """Seeded piecewise-constant weather category, one draw per time block."""

    categories = WEATHER_CATEGORIES

    def __init__(self, seed, block_hours=6):
        self.seed = int(seed)
        self.block_hours = int(block_hours)
        self._cache = {}

    def __call__(self, epoch_s):
        block = int(epoch_s) // (self.block_hours * 3600)
        cached = self._cache.get(block)
        if cached is None:
            rng = np.random.default_rng([self.seed, block % (2 ** 48)])
            cached = int(rng.choice(len(WEATHER_CATEGORIES), p=WEATHER_PROBS))
            self._cache[block] = cached
        return cached


@dataclass(frozen=True)
class CitySpec:
    """Grid topology with random shortcut edges; fully seeded."""

    n_segments: int
    shortcut_fraction: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.n_segments < 2:
            raise ValueError("need at least 2 segments")
        if self.shortcut_fraction < 0:
            raise ValueError("shortcut_fraction must be non-negative")


@dataclass(frozen=True)
class TravelTimeModel:
    """Multiplicative ground-truth travel-time process."""

    hour_multipliers: tuple = DEFAULT_HOUR_MULTIPLIERS
    weather_multipliers: tuple = DEFAULT_WEATHER_MULTIPLIERS
    noise_sigma: float = 0.15
    bad_road_factor: float = 0.75

    def __post_init__(self):
        if len(self.hour_multipliers) != 24:
            raise ValueError("need 24 hour multipliers")
        if min(self.hour_multipliers) <= 0 or min(self.weather_multipliers) <= 0 \
                or self.bad_road_factor <= 0:
            raise ValueError("multipliers must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


def segment_speed_mps(model, segment):
    speed = segment.def_speed_kmh / 3.6
    if segment.bad_road:
        speed *= model.bad_road_factor
    return speed


def _traversed_lengths(graph, nodes, start_part, finish_part):
    lengths = np.array([graph.segment_length(int(v)) for v in nodes])
    if len(nodes) == 1:
        return np.array([max(0.0, finish_part - start_part)])
    lengths[0] -= start_part
    lengths[-1] = finish_part
    return lengths


def trip_travel_time(graph, nodes, start_part, finish_part, model, hour,
                     weather_idx, noise=1.0):
    """Ground-truth duration in seconds for a node sequence and offsets."""
    traversed = _traversed_lengths(graph, nodes, start_part, finish_part)
    speeds = np.array([segment_speed_mps(model, graph.raw_segments[int(v)])
                       for v in nodes])
    base = float(np.sum(traversed / speeds))
    return base * model.hour_multipliers[hour] \
        * model.weather_multipliers[weather_idx] * noise


def generate_city(spec, out_dir=None):
    """Build a connected synthetic road graph; optionally write the CSV pair.

    Identical specs produce byte-identical files.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_segments
    cols = math.ceil(math.sqrt(n))

    pairs = []
    for k in range(n):
        if (k + 1) % cols and k + 1 < n:
            pairs.append((k, k + 1))
        if k + cols < n:
            pairs.append((k, k + cols))
    n_shortcuts = int(round(spec.shortcut_fraction * n))
    if n_shortcuts:
        extra = rng.integers(0, n, size=(n_shortcuts, 2))
        pairs.extend((int(a), int(b)) for a, b in extra if a != b)
    adjacency = SparseAdjacency.from_edges(n, pairs, symmetric=True)

    class_names = list(_CLASS_TABLE)
    class_probs = np.array([_CLASS_TABLE[c][0] for c in class_names])
    class_probs = class_probs / class_probs.sum()
    style_names = list(STYLES)
    style_probs = np.array([_STYLE_PROBS[s] for s in style_names])
    style_probs = style_probs / style_probs.sum()

    segments = []
    for _ in range(n):
        cls = class_names[int(rng.choice(len(class_names), p=class_probs))]
        _, log_len, speed_choices, lane_choices = _CLASS_TABLE[cls]
        length = float(np.clip(round(math.exp(rng.normal(log_len, 0.5)), 1),
                               10.0, 3000.0))
        lanes = int(rng.choice(lane_choices))
        width = round(lanes * 3.5 + rng.uniform(2.0, 4.0), 1)
        segments.append(SegmentFeatures(
            road_class=cls,
            length_m=length,
            width_m=width,
            def_speed_kmh=int(rng.choice(speed_choices)),
            lanes=lanes,
            barrier=bool(rng.random() < 0.03),
            payment_flag=bool(rng.random() < 0.01),
            turn_restrictions=bool(rng.random() < 0.08),
            pedo_offset=bool(rng.random() < 0.05),
            bad_road=bool(rng.random() < 0.07),
            style=style_names[int(rng.choice(len(style_names), p=style_probs))],
        ))

    n_components, _ = connected_components(adjacency.to_scipy(), directed=False)
    if n_components != 1:
        raise AssertionError("generated graph is not connected")

    stats = compute_norm_stats(segments)
    graph = RoadGraph(
        n=n,
        adjacency=adjacency,
        features=encode_features(segments, stats),
        segment_ids=np.arange(n, dtype=np.int64),
        id_to_index={i: i for i in range(n)},
        raw_segments=segments,
        norm_stats=stats,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_graph(graph, out_dir / "nodes.csv", out_dir / "edges.csv")
    return graph


def generate_trips(graph, count, model, seed, path=None, weather=None,
                   rebuild_prob=0.03):
    """Sample trips as noisy shortest paths between random endpoints.

    Per-trip vertex cost perturbations make the routing a hybrid between
    shortest paths and random walks.  Durations follow the travel-time
    model; ``real_dist`` is the traversed (offset-adjusted) length.
    A small fraction of trips gets rebuild_count >= 2 to exercise filtering.
    """
    rng = np.random.default_rng(seed)
    if weather is None:
        weather = WeatherModel(seed)
    adj = graph.adjacency
    n = graph.n
    lengths = np.array([s.length_m for s in graph.raw_segments])
    entry_rows = adj.entry_rows()
    window = TRIP_WINDOW_DAYS * 86400

    trips = []
    while len(trips) < count:
        source = int(rng.integers(0, n))
        target = int(rng.integers(0, n))
        if source == target:
            continue
        perturbed = lengths * rng.uniform(0.7, 1.4, size=n)
        data = 0.5 * (perturbed[entry_rows] + perturbed[adj.indices])
        csgraph = sp.csr_matrix((data, adj.indices, adj.indptr), shape=(n, n))
        _, predecessors = dijkstra(csgraph, directed=False, indices=source,
                                   return_predecessors=True)
        if predecessors[target] < 0:
            continue
        nodes = [target]
        while nodes[-1] != source:
            nodes.append(int(predecessors[nodes[-1]]))
        nodes.reverse()

        first_len = graph.segment_length(nodes[0])
        last_len = graph.segment_length(nodes[-1])
        start_part = round(float(rng.uniform(0.0, 0.9 * first_len)), 1)
        finish_part = round(float(rng.uniform(0.1 * last_len, last_len)), 1)
        start_utc = int(TRIP_WINDOW_START + rng.integers(0, window))
        hour = (start_utc // 3600) % 24
        weather_idx = weather(start_utc)
        noise = math.exp(rng.normal(0.0, model.noise_sigma)) \
            if model.noise_sigma > 0 else 1.0
        duration = trip_travel_time(graph, nodes, start_part, finish_part,
                                    model, hour, weather_idx, noise)
        traversed = float(np.sum(_traversed_lengths(graph, nodes, start_part,
                                                    finish_part)))
        rebuild = 0
        if rng.random() < rebuild_prob:
            rebuild = 2 + int(rng.poisson(0.5))
        trips.append(Trip(
            nodes=np.asarray(nodes, dtype=np.int64),
            dist_to_a_m=round(float(rng.uniform(0.0, 50.0)), 1),
            dist_to_b_m=round(float(rng.uniform(0.0, 50.0)), 1),
            start_point_part_m=start_part,
            finish_point_part_m=finish_part,
            start_utc=start_utc,
            real_time_of_arrival_s=round(duration, 3),
            real_dist_m=round(traversed, 3),
            rebuild_count=rebuild,
        ))
    if path is not None:
        save_trips(trips, graph, path)
    return trips
