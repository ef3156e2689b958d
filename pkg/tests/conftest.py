import numpy as np
import pytest

from roadeta.sparse import SparseAdjacency


class GraphBox:
    """Bare adjacency + features holder, enough for encoders and trainers."""

    def __init__(self, adjacency, features):
        self.adjacency = adjacency
        self.features = features
        self.n = adjacency.n


def random_graph(n, p, seed, dim=None):
    """Erdos-Renyi adjacency (possibly with isolated vertices) and features."""
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p]
    adj = SparseAdjacency.from_edges(n, edges)
    if dim is None:
        return adj
    return GraphBox(adj, rng.normal(size=(n, dim)))


def two_community_graph(n=200, seed=0, p_in=0.1, p_out=0.01, dim=8, noise=0.1):
    """Two feature-distinct communities; the standard learnability fixture."""
    rng = np.random.default_rng(seed)
    half = n // 2
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            same = (i < half) == (j < half)
            if rng.random() < (p_in if same else p_out):
                edges.append((i, j))
    adj = SparseAdjacency.from_edges(n, edges)
    features = np.zeros((n, dim))
    features[:half, :dim // 2] = 1.0
    features[half:, dim // 2:] = 1.0
    features += rng.normal(0.0, noise, size=features.shape)
    return GraphBox(adj, features)


@pytest.fixture(scope="session")
def small_city(tmp_path_factory):
    """A 150-segment city with 400 trips written to disk once per session."""
    from roadeta.synth import CitySpec, TravelTimeModel, WeatherModel, \
        generate_city, generate_trips

    out = tmp_path_factory.mktemp("small_city")
    graph = generate_city(CitySpec(n_segments=150, seed=11), out_dir=out)
    trips = generate_trips(graph, 400, TravelTimeModel(), seed=12,
                           path=out / "trips.jsonl", weather=WeatherModel(12))
    return {"dir": out, "graph": graph, "trips": trips, "seed": 12}
