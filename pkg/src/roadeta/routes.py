"""Route-level vectors: sum aggregation, virtual-node extension, augmentation."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .encoders import encoder_forward
from .roads import effective_route_length
from .sparse import SparseAdjacency


class UnknownNode(KeyError):
    pass


class EmptyRoute(ValueError):
    pass


class RouteNotInExtension(KeyError):
    pass


def aggregate_sum(embeddings, trip):
    """Sum the embeddings of the route's node sequence, with multiplicity.

    The sum runs in sorted-index order, so any reordering of the same
    multiset of nodes produces a bitwise-identical vector.
    """
    nodes = np.asarray(getattr(trip, "nodes", trip), dtype=np.int64)
    if nodes.size and (nodes.min() < 0 or nodes.max() >= embeddings.shape[0]):
        raise UnknownNode(f"route references vertex outside 0..{embeddings.shape[0] - 1}")
    return embeddings[np.sort(nodes)].sum(axis=0)


@dataclass
class ExtendedGraph:
    """Base graph plus one virtual vertex per route.

    Virtual vertex ``n_base + k`` is adjacent to exactly the distinct
    vertices of route k and carries the mean of their feature rows; the
    adjacency restricted to base vertices is the base adjacency entrywise.
    """

    adjacency: SparseAdjacency
    features: np.ndarray
    n_base: int
    n_routes: int

    @property
    def n(self):
        return self.n_base + self.n_routes

    def virtual_index(self, route_idx):
        if not 0 <= route_idx < self.n_routes:
            raise RouteNotInExtension(f"route {route_idx} is not part of the extension")
        return self.n_base + route_idx

    def route_of(self, vertex):
        route_idx = vertex - self.n_base
        if not 0 <= route_idx < self.n_routes:
            raise RouteNotInExtension(f"vertex {vertex} is not a virtual vertex")
        return route_idx


def extend_graph_virtual_nodes(graph, routes):
    """Append one virtual vertex per route to ``graph``.

    Duplicate vertices within a route still produce a single 0/1 adjacency
    entry.  Virtual vertices are never adjacent to each other.
    """
    n = graph.n
    base_adj = graph.adjacency
    pairs = [np.stack([base_adj.entry_rows(), base_adj.indices], axis=1)]
    virtual_rows = []
    for k, route in enumerate(routes):
        nodes = np.asarray(getattr(route, "nodes", route), dtype=np.int64)
        if nodes.size == 0:
            raise EmptyRoute(f"route {k} has no nodes")
        distinct = np.unique(nodes)
        pairs.append(np.stack([distinct, np.full(distinct.size, n + k)], axis=1))
        virtual_rows.append(graph.features[distinct].mean(axis=0))
    all_pairs = np.concatenate(pairs, axis=0) if pairs else np.empty((0, 2), np.int64)
    adjacency = SparseAdjacency.from_edges(n + len(routes), all_pairs, symmetric=True)
    if virtual_rows:
        features = np.vstack([graph.features, np.stack(virtual_rows)])
    else:
        features = graph.features.copy()
    return ExtendedGraph(adjacency=adjacency, features=features,
                         n_base=n, n_routes=len(routes))


def virtual_node_embeddings(ext, encoder):
    """Embedding rows of the virtual vertices, one row per route index."""
    z = encoder_forward(ext, encoder)
    return z[ext.n_base:]


class ConstantWeather:
    """Stub lookup for datasets without a weather feed."""

    def __init__(self, categories=("unknown",), index=0):
        self.categories = tuple(categories)
        self._index = index

    def __call__(self, epoch_s):
        return self._index


@dataclass(frozen=True)
class AugmentStats:
    """Training-set mean/std for the numeric augmentation features."""

    means: np.ndarray  # (effective_length, dist_to_a, dist_to_b)
    stds: np.ndarray


def _numeric_augmentation(trip, graph):
    return np.array([effective_route_length(trip, graph),
                     trip.dist_to_a_m, trip.dist_to_b_m], dtype=np.float64)


def compute_augment_stats(trips, graph):
    values = np.stack([_numeric_augmentation(t, graph) for t in trips])
    stds = values.std(axis=0)
    stds[stds == 0] = 1.0
    return AugmentStats(means=values.mean(axis=0), stds=stds)


def route_vector_layout(embed_dim, weather):
    """Column layout of an assembled route vector, in order."""
    return [
        ("embedding", embed_dim),
        ("effective_length_z", 1),
        ("dist_to_a_z", 1),
        ("dist_to_b_z", 1),
        ("hour_onehot", 24),
        ("day_onehot", 7),
        ("weather_onehot", len(weather.categories)),
    ]


def augment_route_vector(z, trip, graph, weather, stats):
    """Concatenate a route embedding with its temporal/weather features.

    Layout per ``route_vector_layout``: embedding, z-scored numeric triple,
    UTC hour-of-day one-hot, weekday one-hot (Monday = 0), weather one-hot.
    """
    numeric = (_numeric_augmentation(trip, graph) - stats.means) / stats.stds
    moment = datetime.fromtimestamp(trip.start_utc, tz=timezone.utc)
    hour = np.zeros(24)
    hour[moment.hour] = 1.0
    day = np.zeros(7)
    day[moment.weekday()] = 1.0
    weather_onehot = np.zeros(len(weather.categories))
    weather_onehot[weather(trip.start_utc)] = 1.0
    return np.concatenate([np.asarray(z, dtype=np.float64), numeric,
                           hour, day, weather_onehot])


def sum_route_embeddings(node_embeddings, trips):
    """Stack of per-trip summed node embeddings."""
    return np.stack([aggregate_sum(node_embeddings, t) for t in trips])


def mean_feature_rows(features, trips):
    """Per-trip mean of encoded node feature rows (the no-encoder block)."""
    return np.stack([features[t.nodes].mean(axis=0) for t in trips])


def assemble_route_dataset(blocks, trips, graph, weather, stats):
    """Combine per-trip embedding blocks with augmentation; returns (X, y)."""
    if len(blocks) != len(trips):
        raise ValueError("one embedding block per trip required")
    x = np.stack([augment_route_vector(blocks[i], trips[i], graph, weather, stats)
                  for i in range(len(trips))])
    y = np.array([t.real_time_of_arrival_s for t in trips], dtype=np.float64)
    return x, y
