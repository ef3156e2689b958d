"""Road graph and trip datasets: schema, loading, validation, encoding, filtering.

Vertices are road segments; adjacency entries encode segment connectivity.
File formats:

* nodes CSV, header ``segment_id,road_class,length,width,def_speed,lanes,
  barrier,payment_flag,turn_restrictions,pedo_offset,bad_road,style``
* edges CSV, header ``src_segment_id,dst_segment_id`` (undirected, duplicate
  rows ignored, self-referencing rows dropped)
* trips JSON-Lines, one object per line with keys ``nodes``, ``dist_to_a``,
  ``dist_to_b``, ``start_point_part``, ``finish_point_part``, ``start_utc``,
  ``real_time_of_arrival``, ``real_dist``, ``rebuild_count``
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .sparse import SparseAdjacency

ROAD_CLASSES = (
    "fake road",
    "intra-quarter driveway",
    "dirt road",
    "other city street",
    "main city street",
    "highway",
    "intercity road",
    "federal highway",
    "cycle path",
    "walkway",
)

DEF_SPEEDS = (3, 15, 20, 60, 90)

LANES = (0, 1, 2, 3, 4, 5)

STYLES = (
    "undefined",
    "archway",
    "crosswalk",
    "stairway",
    "bridge",
    "overground way",
    "invisible",
    "normal",
    "park path",
    "park footpath",
    "subway",
    "pedestrian bridge",
    "underground way",
    "tunnel",
    "living zone",
    "ford",
)

FLAG_NAMES = ("barrier", "payment_flag", "turn_restrictions", "pedo_offset", "bad_road")

NODES_HEADER = ("segment_id", "road_class", "length", "width", "def_speed", "lanes",
                "barrier", "payment_flag", "turn_restrictions", "pedo_offset",
                "bad_road", "style")
EDGES_HEADER = ("src_segment_id", "dst_segment_id")
TRIP_KEYS = ("nodes", "dist_to_a", "dist_to_b", "start_point_part",
             "finish_point_part", "start_utc", "real_time_of_arrival",
             "real_dist", "rebuild_count")

#: Encoded feature matrix layout, in column order.  Widths sum to 44.
FEATURE_LAYOUT = (
    ("road_class_onehot", len(ROAD_CLASSES)),   # 10
    ("length_zscore", 1),
    ("width_zscore", 1),
    ("def_speed_onehot", len(DEF_SPEEDS)),      # 5
    ("lanes_onehot", len(LANES)),               # 6
    ("flags", len(FLAG_NAMES)),                 # 5
    ("style_onehot", len(STYLES)),              # 16
)
FEATURE_DIM = sum(width for _, width in FEATURE_LAYOUT)


class MissingFile(FileNotFoundError):
    pass


class SchemaViolation(ValueError):
    """A row failed validation; carries the 1-based row/line and column."""

    def __init__(self, row, column, message):
        super().__init__(f"row {row}, column {column!r}: {message}")
        self.row = row
        self.column = column


class DanglingEdgeEndpoint(ValueError):
    def __init__(self, row, segment_id):
        super().__init__(f"row {row}: edge endpoint {segment_id} is not a known segment")
        self.row = row
        self.segment_id = segment_id


class NonAdjacentConsecutiveNodes(ValueError):
    def __init__(self, line, u, v):
        super().__init__(f"line {line}: consecutive trip nodes {u} and {v} "
                         f"are not adjacent in the graph")
        self.line = line


class UnknownCategory(ValueError):
    def __init__(self, column, value):
        super().__init__(f"unknown {column} value {value!r}")
        self.column = column
        self.value = value


@dataclass(frozen=True)
class SegmentFeatures:
    """Raw per-segment attributes, vocabulary-checked at construction."""

    road_class: str
    length_m: float
    width_m: float
    def_speed_kmh: int
    lanes: int
    barrier: bool
    payment_flag: bool
    turn_restrictions: bool
    pedo_offset: bool
    bad_road: bool
    style: str

    def __post_init__(self):
        if self.road_class not in ROAD_CLASSES:
            raise UnknownCategory("road_class", self.road_class)
        if self.def_speed_kmh not in DEF_SPEEDS:
            raise UnknownCategory("def_speed", self.def_speed_kmh)
        if self.lanes not in LANES:
            raise UnknownCategory("lanes", self.lanes)
        if self.style not in STYLES:
            raise UnknownCategory("style", self.style)
        if not self.length_m > 0:
            raise ValueError(f"length must be positive, got {self.length_m}")
        if self.width_m < 0:
            raise ValueError(f"width must be non-negative, got {self.width_m}")


@dataclass(frozen=True)
class NormStats:
    """Length/width normalization constants from the training graph."""

    length_mean: float
    length_std: float
    width_mean: float
    width_std: float


@dataclass
class RoadGraph:
    """Immutable segment graph: symmetric 0/1 adjacency plus encoded features."""

    n: int
    adjacency: SparseAdjacency
    features: np.ndarray
    segment_ids: np.ndarray            # dense index -> external id
    id_to_index: dict
    raw_segments: list
    norm_stats: NormStats

    def adjacent(self, i, j):
        row = self.adjacency.row(i)
        pos = np.searchsorted(row, j)
        return pos < row.size and row[pos] == j

    def segment_length(self, i):
        return self.raw_segments[i].length_m


@dataclass
class Trip:
    """One route record; ``nodes`` holds dense vertex indices."""

    nodes: np.ndarray
    dist_to_a_m: float
    dist_to_b_m: float
    start_point_part_m: float
    finish_point_part_m: float
    start_utc: int
    real_time_of_arrival_s: float
    real_dist_m: float
    rebuild_count: int


class FilterReason(Enum):
    REBUILD_COUNT = "rebuild_count"
    TOO_SHORT = "too_short"
    TOO_LONG = "too_long"
    TOO_FEW_NODES = "too_few_nodes"
    TOO_MANY_NODES = "too_many_nodes"


@dataclass(frozen=True)
class TripFilterConfig:
    """Bounds for dropping rebuilt and anomalously short/long routes."""

    max_rebuild_count: int = 1
    min_duration_s: float = 60.0
    max_duration_s: float = 3 * 3600.0
    min_nodes: int = 2
    max_nodes: int = 500

    def __post_init__(self):
        if not self.min_duration_s < self.max_duration_s:
            raise ValueError("min_duration_s must be below max_duration_s")
        if not self.min_nodes < self.max_nodes:
            raise ValueError("min_nodes must be below max_nodes")


@dataclass(frozen=True)
class StatsReport:
    n_vertices: int
    adjacency_entries: int
    n_trips: int
    trip_coverage: float            # fraction of vertices on >= 1 trip
    vertex_usage_median: float      # median trip count among used vertices


def compute_norm_stats(segments):
    lengths = np.array([s.length_m for s in segments], dtype=np.float64)
    widths = np.array([s.width_m for s in segments], dtype=np.float64)

    def _std(x):
        s = float(np.std(x))
        return s if s > 0 else 1.0

    return NormStats(float(np.mean(lengths)), _std(lengths),
                     float(np.mean(widths)), _std(widths))


def encode_features(segments, stats):
    """Encode raw segments into the fixed 44-column matrix.

    Column order follows FEATURE_LAYOUT: road-class one-hot, z-scored length,
    z-scored width, speed-limit one-hot, lane-count one-hot, the five binary
    flags, style one-hot.
    """
    n = len(segments)
    out = np.zeros((n, FEATURE_DIM), dtype=np.float64)
    class_index = {c: i for i, c in enumerate(ROAD_CLASSES)}
    speed_index = {v: i for i, v in enumerate(DEF_SPEEDS)}
    style_index = {s: i for i, s in enumerate(STYLES)}
    speed_off = len(ROAD_CLASSES) + 2
    lanes_off = speed_off + len(DEF_SPEEDS)
    flags_off = lanes_off + len(LANES)
    style_off = flags_off + len(FLAG_NAMES)
    for i, seg in enumerate(segments):
        out[i, class_index[seg.road_class]] = 1.0
        out[i, len(ROAD_CLASSES)] = (seg.length_m - stats.length_mean) / stats.length_std
        out[i, len(ROAD_CLASSES) + 1] = (seg.width_m - stats.width_mean) / stats.width_std
        out[i, speed_off + speed_index[seg.def_speed_kmh]] = 1.0
        out[i, lanes_off + seg.lanes] = 1.0
        flags = (seg.barrier, seg.payment_flag, seg.turn_restrictions,
                 seg.pedo_offset, seg.bad_road)
        for j, flag in enumerate(flags):
            out[i, flags_off + j] = float(flag)
        out[i, style_off + style_index[seg.style]] = 1.0
    if not np.all(np.isfinite(out)):
        raise ValueError("encoded feature matrix contains non-finite entries")
    return out


def _parse_int(value, row, column):
    try:
        return int(value)
    except ValueError:
        raise SchemaViolation(row, column, f"expected integer, got {value!r}") from None


def _parse_float(value, row, column):
    try:
        return float(value)
    except ValueError:
        raise SchemaViolation(row, column, f"expected number, got {value!r}") from None


def _parse_flag(value, row, column):
    if value not in ("0", "1"):
        raise SchemaViolation(row, column, f"expected 0 or 1, got {value!r}")
    return value == "1"


def load_graph(nodes_path, edges_path):
    """Load and validate a road graph from the nodes/edges CSV pair."""
    nodes_path, edges_path = Path(nodes_path), Path(edges_path)
    for p in (nodes_path, edges_path):
        if not p.exists():
            raise MissingFile(str(p))

    segments = []
    ids = []
    id_to_index = {}
    with open(nodes_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != NODES_HEADER:
            raise SchemaViolation(1, "header",
                                  f"expected {','.join(NODES_HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(NODES_HEADER):
                raise SchemaViolation(row_no, "row",
                                      f"expected {len(NODES_HEADER)} fields, got {len(row)}")
            rec = dict(zip(NODES_HEADER, row))
            seg_id = _parse_int(rec["segment_id"], row_no, "segment_id")
            if seg_id in id_to_index:
                raise SchemaViolation(row_no, "segment_id",
                                      f"duplicate segment id {seg_id}")
            try:
                seg = SegmentFeatures(
                    road_class=rec["road_class"],
                    length_m=_parse_float(rec["length"], row_no, "length"),
                    width_m=_parse_float(rec["width"], row_no, "width"),
                    def_speed_kmh=_parse_int(rec["def_speed"], row_no, "def_speed"),
                    lanes=_parse_int(rec["lanes"], row_no, "lanes"),
                    barrier=_parse_flag(rec["barrier"], row_no, "barrier"),
                    payment_flag=_parse_flag(rec["payment_flag"], row_no, "payment_flag"),
                    turn_restrictions=_parse_flag(rec["turn_restrictions"], row_no,
                                                  "turn_restrictions"),
                    pedo_offset=_parse_flag(rec["pedo_offset"], row_no, "pedo_offset"),
                    bad_road=_parse_flag(rec["bad_road"], row_no, "bad_road"),
                    style=rec["style"],
                )
            except (UnknownCategory, ValueError) as exc:
                if isinstance(exc, SchemaViolation):
                    raise
                column = exc.column if isinstance(exc, UnknownCategory) else "row"
                raise SchemaViolation(row_no, column, str(exc)) from None
            id_to_index[seg_id] = len(segments)
            segments.append(seg)
            ids.append(seg_id)

    pairs = []
    with open(edges_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != EDGES_HEADER:
            raise SchemaViolation(1, "header", f"expected {','.join(EDGES_HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise SchemaViolation(row_no, "row", "expected 2 fields")
            src = _parse_int(row[0], row_no, "src_segment_id")
            dst = _parse_int(row[1], row_no, "dst_segment_id")
            for endpoint in (src, dst):
                if endpoint not in id_to_index:
                    raise DanglingEdgeEndpoint(row_no, endpoint)
            if src != dst:
                pairs.append((id_to_index[src], id_to_index[dst]))

    n = len(segments)
    adjacency = SparseAdjacency.from_edges(n, pairs, symmetric=True)
    stats = compute_norm_stats(segments)
    features = encode_features(segments, stats)
    return RoadGraph(n=n, adjacency=adjacency, features=features,
                     segment_ids=np.asarray(ids, dtype=np.int64),
                     id_to_index=id_to_index, raw_segments=segments,
                     norm_stats=stats)


def save_graph(graph, nodes_path, edges_path):
    """Write a graph back to the CSV pair; exact load round-trip."""
    with open(nodes_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(NODES_HEADER)
        for idx in range(graph.n):
            seg = graph.raw_segments[idx]
            writer.writerow([
                int(graph.segment_ids[idx]),
                seg.road_class,
                repr(seg.length_m),
                repr(seg.width_m),
                seg.def_speed_kmh,
                seg.lanes,
                int(seg.barrier),
                int(seg.payment_flag),
                int(seg.turn_restrictions),
                int(seg.pedo_offset),
                int(seg.bad_road),
                seg.style,
            ])
    with open(edges_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EDGES_HEADER)
        for i in range(graph.n):
            for j in graph.adjacency.row(i):
                if i < j:
                    writer.writerow([int(graph.segment_ids[i]),
                                     int(graph.segment_ids[j])])


def load_trips(path, graph):
    """Parse and validate a JSON-Lines trip log against a loaded graph.

    Raises on the first invalid line, carrying its 1-based line number;
    nothing is silently dropped.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    trips = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(line_no, "json", str(exc)) from None
            for key in TRIP_KEYS:
                if key not in obj:
                    raise SchemaViolation(line_no, key, "missing key")
            raw_nodes = obj["nodes"]
            if not isinstance(raw_nodes, list) or len(raw_nodes) < 1:
                raise SchemaViolation(line_no, "nodes", "expected non-empty array")
            try:
                nodes = np.asarray([graph.id_to_index[v] for v in raw_nodes],
                                   dtype=np.int64)
            except KeyError as exc:
                raise SchemaViolation(line_no, "nodes",
                                      f"unknown segment id {exc.args[0]}") from None
            for u, v in zip(nodes[:-1], nodes[1:]):
                if not graph.adjacent(int(u), int(v)):
                    raise NonAdjacentConsecutiveNodes(
                        line_no, int(graph.segment_ids[u]), int(graph.segment_ids[v]))
            trip = Trip(
                nodes=nodes,
                dist_to_a_m=float(obj["dist_to_a"]),
                dist_to_b_m=float(obj["dist_to_b"]),
                start_point_part_m=float(obj["start_point_part"]),
                finish_point_part_m=float(obj["finish_point_part"]),
                start_utc=int(obj["start_utc"]),
                real_time_of_arrival_s=float(obj["real_time_of_arrival"]),
                real_dist_m=float(obj["real_dist"]),
                rebuild_count=int(obj["rebuild_count"]),
            )
            for column in ("dist_to_a_m", "dist_to_b_m", "start_point_part_m",
                           "finish_point_part_m"):
                if getattr(trip, column) < 0:
                    raise SchemaViolation(line_no, column, "must be non-negative")
            if trip.real_time_of_arrival_s <= 0:
                raise SchemaViolation(line_no, "real_time_of_arrival", "must be positive")
            if trip.real_dist_m <= 0:
                raise SchemaViolation(line_no, "real_dist", "must be positive")
            if trip.rebuild_count < 0:
                raise SchemaViolation(line_no, "rebuild_count", "must be non-negative")
            first_len = graph.segment_length(int(nodes[0]))
            last_len = graph.segment_length(int(nodes[-1]))
            if trip.start_point_part_m > first_len:
                raise SchemaViolation(line_no, "start_point_part",
                                      f"exceeds first segment length {first_len}")
            if trip.finish_point_part_m > last_len:
                raise SchemaViolation(line_no, "finish_point_part",
                                      f"exceeds last segment length {last_len}")
            trips.append(trip)
    return trips


def save_trips(trips, graph, path):
    """Serialize trips back to JSON-Lines with external segment ids."""
    with open(path, "w") as fh:
        for trip in trips:
            obj = {
                "nodes": [int(graph.segment_ids[v]) for v in trip.nodes],
                "dist_to_a": trip.dist_to_a_m,
                "dist_to_b": trip.dist_to_b_m,
                "start_point_part": trip.start_point_part_m,
                "finish_point_part": trip.finish_point_part_m,
                "start_utc": trip.start_utc,
                "real_time_of_arrival": trip.real_time_of_arrival_s,
                "real_dist": trip.real_dist_m,
                "rebuild_count": trip.rebuild_count,
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def filter_trips(trips, cfg):
    """Partition trips into (kept, rejected) under the filter bounds.

    Every rejected trip carries exactly one reason: the first failing check
    in the order rebuild count, too short, too long, too few nodes, too many
    nodes.  Total function; kept + rejected is the input.
    """
    kept = []
    rejected = []
    for trip in trips:
        if trip.rebuild_count > cfg.max_rebuild_count:
            rejected.append((trip, FilterReason.REBUILD_COUNT))
        elif trip.real_time_of_arrival_s < cfg.min_duration_s:
            rejected.append((trip, FilterReason.TOO_SHORT))
        elif trip.real_time_of_arrival_s > cfg.max_duration_s:
            rejected.append((trip, FilterReason.TOO_LONG))
        elif len(trip.nodes) < cfg.min_nodes:
            rejected.append((trip, FilterReason.TOO_FEW_NODES))
        elif len(trip.nodes) > cfg.max_nodes:
            rejected.append((trip, FilterReason.TOO_MANY_NODES))
        else:
            kept.append(trip)
    return kept, rejected


def effective_route_length(trip, graph):
    """Traversed meters: segment lengths minus the untraveled boundary parts.

    total = sum(lengths) - start_point_part - (len(last) - finish_point_part),
    clamped at zero.  Never exceeds the plain sum of segment lengths.
    """
    total = sum(graph.segment_length(int(v)) for v in trip.nodes)
    last_len = graph.segment_length(int(trip.nodes[-1]))
    value = total - trip.start_point_part_m - (last_len - trip.finish_point_part_m)
    return max(0.0, value)


def dataset_stats(graph, trips):
    """Headline dataset statistics.

    Coverage is vertex coverage: the fraction of graph vertices appearing in
    at least one trip.  Usage median is the median number of trips touching
    a vertex, over used vertices only (0.0 when no trips).
    """
    usage = np.zeros(graph.n, dtype=np.int64)
    for trip in trips:
        usage[np.unique(trip.nodes)] += 1
    used = usage[usage > 0]
    coverage = used.size / graph.n if graph.n else 0.0
    median = float(statistics.median(used.tolist())) if used.size else 0.0
    return StatsReport(
        n_vertices=graph.n,
        adjacency_entries=graph.adjacency.nnz,
        n_trips=len(trips),
        trip_coverage=coverage,
        vertex_usage_median=median,
    )
