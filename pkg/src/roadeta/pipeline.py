"""End-to-end experiment drivers shared by the CLI and the demo scripts.

The comparison matrix has six rows: an MLP fed only augmentation plus mean
node features (no learned embedding), edge-contrastive encoders with the
virtual-node and the sum strategy, and corruption-trained (discriminator)
encoders of all three kinds with the sum strategy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dgi import DgiModel, DgiTrainConfig, embed_nodes, train_dgi, write_loss_history
from .edge_contrast import EdgeContrastConfig, train_edge_contrast
from .encoders import Encoder, EncoderConfig
from .regression import (MlpConfig, SplitSpec, compute_metrics, conditioned_mlp,
                         error_histogram, mlp_forward, split_dataset,
                         train_regressor)
from .roads import TripFilterConfig, filter_trips
from .routes import (assemble_route_dataset, compute_augment_stats,
                     extend_graph_virtual_nodes, mean_feature_rows,
                     route_vector_layout, sum_route_embeddings,
                     virtual_node_embeddings)
from .tensorio import read_tensor, write_tensor

EXPERIMENT_ROWS = ("baseline_mlp", "sage_vn", "sage_sum",
                   "dgi_gcn_sum", "dgi_gat_sum", "dgi_sage_sum")

COMPARISON_HEADER = ("config", "mae", "rmse", "mape")


@dataclass
class PipelineConfig:
    """Knobs for one experiment run; everything downstream is seeded."""

    seed: int = 0
    encoder_layers: int = 2
    hidden_dim: int = 128
    embed_epochs: int = 150
    embed_patience: int | None = 30
    reg_epochs: int = 30
    reg_lr: float = 0.0001
    embed_lr: float = 0.001
    batch_size: int = 256
    mlp_hidden: tuple = (256, 64)
    train_count: int | None = None  # default: 5/6 of the filtered trips
    trip_filter: TripFilterConfig = field(default_factory=TripFilterConfig)


@dataclass
class RowResult:
    label: str
    metrics: object = None
    y_test: np.ndarray = None
    y_pred: np.ndarray = None
    encoder_history: list = None
    error: str = None


def derive_seed(master, *parts):
    """Stable sub-seed derivation (independent of PYTHONHASHSEED)."""
    seq = np.random.SeedSequence([int(master), *[int(p) for p in parts]])
    return int(seq.generate_state(1)[0])


def resolve_train_count(n_filtered, cfg):
    if cfg.train_count is not None:
        return cfg.train_count
    return max(1, (n_filtered * 5) // 6)


def _encoder_config(kind, cfg):
    return EncoderConfig(kind=kind, num_layers=cfg.encoder_layers,
                         hidden_dim=cfg.hidden_dim)


def _train_embedding_blocks(row, graph, trips, cfg):
    """Per-trip embedding block matrix for one matrix row, plus loss history."""
    row_code = EXPERIMENT_ROWS.index(row)
    init_seed = derive_seed(cfg.seed, row_code, 1)
    train_seed = derive_seed(cfg.seed, row_code, 2)

    if row == "baseline_mlp":
        return mean_feature_rows(graph.features, trips), None

    if row == "sage_vn":
        ext = extend_graph_virtual_nodes(graph, trips)
        encoder = Encoder(_encoder_config("sage", cfg), ext.features.shape[1],
                          seed=init_seed)
        encoder, history = train_edge_contrast(
            ext, encoder, EdgeContrastConfig(epochs=cfg.embed_epochs,
                                             lr=cfg.embed_lr, seed=train_seed,
                                             patience=cfg.embed_patience))
        return virtual_node_embeddings(ext, encoder), history

    if row == "sage_sum":
        encoder = Encoder(_encoder_config("sage", cfg), graph.features.shape[1],
                          seed=init_seed)
        encoder, history = train_edge_contrast(
            graph, encoder, EdgeContrastConfig(epochs=cfg.embed_epochs,
                                               lr=cfg.embed_lr, seed=train_seed,
                                               patience=cfg.embed_patience))
        z = embed_nodes(graph, encoder)
        return sum_route_embeddings(z, trips), history

    kind = {"dgi_gcn_sum": "gcn", "dgi_gat_sum": "gat", "dgi_sage_sum": "sage"}[row]
    encoder = Encoder(_encoder_config(kind, cfg), graph.features.shape[1],
                      seed=init_seed)
    model = DgiModel(encoder, seed=derive_seed(cfg.seed, row_code, 3))
    model, history = train_dgi(
        graph, model, DgiTrainConfig(epochs=cfg.embed_epochs, lr=cfg.embed_lr,
                                     seed=train_seed,
                                     patience=cfg.embed_patience))
    z = embed_nodes(graph, model)
    return sum_route_embeddings(z, trips), history


def run_experiment(graph, trips, weather, cfg, rows=EXPERIMENT_ROWS, out_dir=None):
    """Run the comparison matrix and return one RowResult per requested row.

    A row that raises is reported with its error message and the run
    continues.  When ``out_dir`` is given, writes comparison.csv plus
    per-row metrics JSON, prediction CSVs and encoder loss histories.
    """
    try:
        filtered, _ = filter_trips(trips, cfg.trip_filter)
        split = SplitSpec(resolve_train_count(len(filtered), cfg))
        train_trips, val_trips, _test_trips = split_dataset(filtered, split)
        aug_stats = compute_augment_stats(train_trips, graph)
    except Exception as exc:  # noqa: BLE001 - setup failure fails every row
        results = [RowResult(label=row, error=f"{type(exc).__name__}: {exc}")
                   for row in rows]
        if out_dir is not None:
            write_experiment_outputs(out_dir, results)
        return results

    n_train, n_val = len(train_trips), len(val_trips)
    results = []
    for row in rows:
        row_code = EXPERIMENT_ROWS.index(row)
        try:
            blocks, history = _train_embedding_blocks(row, graph, filtered, cfg)
            x, y = assemble_route_dataset(blocks, filtered, graph, weather,
                                          aug_stats)
            x_train, y_train = x[:n_train], y[:n_train]
            x_val, y_val = x[n_train:n_train + n_val], y[n_train:n_train + n_val]
            x_test, y_test = x[n_train + n_val:], y[n_train + n_val:]
            mlp = conditioned_mlp(MlpConfig(x.shape[1], cfg.mlp_hidden),
                                  x_train, y_train,
                                  seed=derive_seed(cfg.seed, row_code, 4))
            mlp, _ = train_regressor((x_train, y_train), (x_val, y_val), mlp,
                                     epochs=cfg.reg_epochs, lr=cfg.reg_lr,
                                     batch_size=cfg.batch_size,
                                     seed=derive_seed(cfg.seed, row_code, 5))
            y_pred = mlp_forward(mlp, x_test)
            results.append(RowResult(label=row,
                                     metrics=compute_metrics(y_test, y_pred),
                                     y_test=y_test, y_pred=y_pred,
                                     encoder_history=history))
        except Exception as exc:  # noqa: BLE001 - row isolation is the contract
            results.append(RowResult(label=row, error=f"{type(exc).__name__}: {exc}"))
    if out_dir is not None:
        write_experiment_outputs(out_dir, results)
    return results


def write_comparison_csv(path, results):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARISON_HEADER)
        for res in results:
            if res.metrics is None:
                writer.writerow([res.label, "", "", ""])
            else:
                writer.writerow([res.label,
                                 f"{res.metrics.mae_s:.4f}",
                                 f"{res.metrics.rmse_s:.4f}",
                                 f"{res.metrics.mape_pct:.4f}"])


def write_experiment_outputs(out_dir, results):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_comparison_csv(out_dir / "comparison.csv", results)
    for res in results:
        if res.error is not None:
            with open(out_dir / f"failed_{res.label}.txt", "w") as fh:
                fh.write(res.error + "\n")
            continue
        with open(out_dir / f"metrics_{res.label}.json", "w") as fh:
            json.dump({"mae": res.metrics.mae_s, "rmse": res.metrics.rmse_s,
                       "mape": res.metrics.mape_pct, "count": res.metrics.count},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out_dir / f"predictions_{res.label}.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["y", "y_pred"])
            for target, pred in zip(res.y_test, res.y_pred):
                writer.writerow([repr(float(target)), repr(float(pred))])
        if res.encoder_history is not None:
            write_loss_history(out_dir / f"loss_{res.label}.csv",
                               res.encoder_history)


def save_route_dataset(dirpath, x, y, layout, stats, counts, label):
    """Route-vector dataset: two tensor snapshots plus a JSON sidecar."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    write_tensor(dirpath / "features.tsnp", x)
    write_tensor(dirpath / "targets.tsnp", y)
    meta = {
        "label": label,
        "columns": [[name, width] for name, width in layout],
        "normalization": {"means": list(map(float, stats.means)),
                          "stds": list(map(float, stats.stds))},
        "splits": {"train": counts[0], "val": counts[1], "test": counts[2]},
    }
    with open(dirpath / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_route_dataset(dirpath):
    dirpath = Path(dirpath)
    x = read_tensor(dirpath / "features.tsnp")
    y = read_tensor(dirpath / "targets.tsnp")
    with open(dirpath / "meta.json") as fh:
        meta = json.load(fh)
    return x, y, meta


def dataset_split_slices(meta):
    n_train = meta["splits"]["train"]
    n_val = meta["splits"]["val"]
    n_test = meta["splits"]["test"]
    return (slice(0, n_train),
            slice(n_train, n_train + n_val),
            slice(n_train + n_val, n_train + n_val + n_test))


def build_route_dataset(graph, trips, weather, cfg, blocks):
    """Assemble (x, y, layout, stats, counts) for pre-computed blocks."""
    filtered, _ = filter_trips(trips, cfg.trip_filter)
    split = SplitSpec(resolve_train_count(len(filtered), cfg))
    train_trips, val_trips, test_trips = split_dataset(filtered, split)
    stats = compute_augment_stats(train_trips, graph)
    x, y = assemble_route_dataset(blocks, filtered, graph, weather, stats)
    layout = route_vector_layout(blocks.shape[1], weather)
    counts = (len(train_trips), len(val_trips), len(test_trips))
    return x, y, layout, stats, counts


def write_report(experiment_dir, out_dir, bin_width=10.0):
    """Markdown comparison table plus per-row signed-error histogram CSVs."""
    experiment_dir = Path(experiment_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(experiment_dir / "comparison.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    lines = ["| config | MAE (s) | RMSE (s) | MAPE (%) |",
             "| --- | --- | --- | --- |"]
    for row in rows[1:]:
        cells = [row[0]] + [cell if cell else "failed" for cell in row[1:]]
        lines.append("| " + " | ".join(cells) + " |")
    with open(out_dir / "report.md", "w") as fh:
        fh.write("# Comparison matrix\n\n")
        fh.write("\n".join(lines) + "\n")

    written = [out_dir / "report.md"]
    for pred_file in sorted(experiment_dir.glob("predictions_*.csv")):
        label = pred_file.stem[len("predictions_"):]
        with open(pred_file, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            pairs = [(float(a), float(b)) for a, b in reader]
        y = np.array([a for a, _ in pairs])
        y_pred = np.array([b for _, b in pairs])
        hist = error_histogram(y, y_pred, bin_width)
        out = out_dir / f"histogram_{label}.csv"
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_left", "bin_right", "count"])
            for i, count in enumerate(hist.counts):
                writer.writerow([repr(float(hist.bin_edges[i])),
                                 repr(float(hist.bin_edges[i + 1])),
                                 int(count)])
        written.append(out)
    return written
