"""Command line entry points wiring the pipeline end to end.

Set ROADETA_THREADS to cap the BLAS thread pool; it must be set before the
process imports numpy, which is why this module handles it first.
"""

import os

_threads = os.environ.get("ROADETA_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .dgi import DgiModel, DgiTrainConfig, embed_nodes, load_dgi, save_dgi, \
    train_dgi, write_loss_history
from .edge_contrast import EdgeContrastConfig, train_edge_contrast
from .encoders import Encoder, EncoderConfig, load_encoder, save_encoder
from .regression import (MlpConfig, compute_metrics, conditioned_mlp,
                         error_histogram, load_mlp, mlp_forward, save_mlp,
                         train_regressor)
from .roads import TripFilterConfig, filter_trips, load_graph, load_trips
from .routes import (ConstantWeather, extend_graph_virtual_nodes,
                     mean_feature_rows, sum_route_embeddings,
                     virtual_node_embeddings)
from .synth import CitySpec, TravelTimeModel, WeatherModel, generate_city, \
    generate_trips


def _weather_from_args(args):
    if getattr(args, "weather_seed", None) is None:
        return ConstantWeather()
    return WeatherModel(args.weather_seed)


def _load_dataset(data_dir):
    data_dir = Path(data_dir)
    graph = load_graph(data_dir / "nodes.csv", data_dir / "edges.csv")
    trips = load_trips(data_dir / "trips.jsonl", graph)
    return graph, trips


def _filter_config(args):
    kwargs = {}
    for key in ("max_rebuild_count", "min_duration", "max_duration",
                "min_nodes", "max_nodes"):
        value = getattr(args, key, None)
        if value is not None:
            target = {"min_duration": "min_duration_s",
                      "max_duration": "max_duration_s"}.get(key, key)
            kwargs[target] = value
    return TripFilterConfig(**kwargs)


def cmd_generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = CitySpec(n_segments=args.segments,
                    shortcut_fraction=args.shortcut_fraction, seed=args.seed)
    graph = generate_city(spec, out_dir=out)
    model = TravelTimeModel(noise_sigma=args.noise_sigma)
    generate_trips(graph, args.trips, model, args.seed,
                   path=out / "trips.jsonl", weather=WeatherModel(args.seed),
                   rebuild_prob=args.rebuild_prob)
    print(f"wrote {out / 'nodes.csv'}, {out / 'edges.csv'}, {out / 'trips.jsonl'}")
    return 0


def cmd_train_embed(args):
    graph, trips = _load_dataset(args.data)
    kept, _ = filter_trips(trips, _filter_config(args))
    config = EncoderConfig(kind=args.encoder, num_layers=args.layers,
                           hidden_dim=args.hidden_dim)
    if args.strategy == "virtual":
        target_graph = extend_graph_virtual_nodes(graph, kept)
        in_dim = target_graph.features.shape[1]
    else:
        target_graph = graph
        in_dim = graph.features.shape[1]
    encoder = Encoder(config, in_dim, seed=args.seed)

    if args.objective == "dgi":
        model = DgiModel(encoder, seed=args.seed)
        model, history = train_dgi(target_graph, model,
                                   DgiTrainConfig(epochs=args.epochs, lr=args.lr,
                                                  seed=args.seed,
                                                  patience=args.patience))
        out = Path(args.out)
        save_dgi(out, model)
    else:
        encoder, history = train_edge_contrast(
            target_graph, encoder,
            EdgeContrastConfig(epochs=args.epochs, lr=args.lr, seed=args.seed,
                               patience=args.patience))
        out = Path(args.out)
        save_encoder(out, encoder, extra={"model": "encoder"})
    # record how the checkpoint is meant to be applied downstream
    with open(out / "config.json") as fh:
        descriptor = json.load(fh)
    descriptor["strategy"] = args.strategy
    descriptor["objective"] = args.objective
    with open(out / "config.json", "w") as fh:
        json.dump(descriptor, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_loss_history(out / "loss.csv", history)
    print(f"checkpoint in {out}, {len(history)} epochs logged")
    return 0


def cmd_embed_routes(args):
    graph, trips = _load_dataset(args.data)
    weather = _weather_from_args(args)
    cfg = pipeline.PipelineConfig(train_count=args.train_count,
                                  trip_filter=_filter_config(args))
    kept, _ = filter_trips(trips, cfg.trip_filter)
    if args.checkpoint is None:
        blocks = mean_feature_rows(graph.features, kept)
        label = "baseline_mlp"
    else:
        with open(Path(args.checkpoint) / "config.json") as fh:
            descriptor = json.load(fh)
        if descriptor.get("model") == "dgi":
            model, _ = load_dgi(args.checkpoint)
            encoder = model.encoder
        else:
            encoder, _ = load_encoder(args.checkpoint)
        if descriptor.get("strategy") == "virtual":
            ext = extend_graph_virtual_nodes(graph, kept)
            blocks = virtual_node_embeddings(ext, encoder)
            label = f"{descriptor['kind']}_vn"
        else:
            z = embed_nodes(graph, encoder)
            blocks = sum_route_embeddings(z, kept)
            label = f"{descriptor['kind']}_sum"
    x, y, layout, stats, counts = pipeline.build_route_dataset(
        graph, trips, weather, cfg, blocks)
    pipeline.save_route_dataset(args.out, x, y, layout, stats, counts, label)
    print(f"route dataset in {args.out}: {x.shape[0]} vectors of width {x.shape[1]}")
    return 0


def cmd_train_eta(args):
    x, y, meta = pipeline.load_route_dataset(args.routes)
    tr, va, _ = pipeline.dataset_split_slices(meta)
    mlp = conditioned_mlp(MlpConfig(x.shape[1]), x[tr], y[tr], seed=args.seed)
    mlp, curves = train_regressor((x[tr], y[tr]), (x[va], y[va]), mlp,
                                  epochs=args.epochs, lr=args.lr,
                                  batch_size=args.batch_size, seed=args.seed)
    out = Path(args.out)
    save_mlp(out, mlp)
    with open(out / "curves.csv", "w") as fh:
        fh.write("epoch,train_mse,val_mae\n")
        for epoch, mse, mae in curves:
            fh.write(f"{epoch},{mse!r},{mae!r}\n")
    print(f"regressor in {out}; best val MAE "
          f"{min(c[2] for c in curves):.3f} s")
    return 0


def cmd_evaluate(args):
    x, y, meta = pipeline.load_route_dataset(args.routes)
    slices = dict(zip(("train", "val", "test"),
                      pipeline.dataset_split_slices(meta)))
    part = slices[args.split]
    mlp = load_mlp(args.model)
    y_pred = mlp_forward(mlp, x[part])
    metrics = compute_metrics(y[part], y_pred)
    payload = {"mae": metrics.mae_s, "rmse": metrics.rmse_s,
               "mape": metrics.mape_pct, "count": metrics.count}
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.histogram:
        hist = error_histogram(y[part], y_pred, args.bin_width)
        with open(args.histogram, "w") as fh:
            fh.write("bin_left,bin_right,count\n")
            for i, count in enumerate(hist.counts):
                fh.write(f"{hist.bin_edges[i]!r},{hist.bin_edges[i + 1]!r},"
                         f"{int(count)}\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_run_experiment(args):
    graph, trips = _load_dataset(args.data)
    weather = _weather_from_args(args)
    cfg = pipeline.PipelineConfig(seed=args.seed,
                                  encoder_layers=args.layers,
                                  embed_epochs=args.embed_epochs,
                                  reg_epochs=args.reg_epochs,
                                  train_count=args.train_count,
                                  trip_filter=_filter_config(args))
    rows = tuple(args.rows.split(",")) if args.rows else pipeline.EXPERIMENT_ROWS
    for row in rows:
        if row not in pipeline.EXPERIMENT_ROWS:
            raise SystemExit(f"unknown experiment row {row!r}")
    results = pipeline.run_experiment(graph, trips, weather, cfg, rows=rows,
                                      out_dir=args.out)
    failed = [r.label for r in results if r.error is not None]
    for res in results:
        if res.error is None:
            print(f"{res.label}: MAE {res.metrics.mae_s:.2f} s, "
                  f"RMSE {res.metrics.rmse_s:.2f} s, "
                  f"MAPE {res.metrics.mape_pct:.2f} %")
        else:
            print(f"{res.label}: FAILED ({res.error})")
    return 1 if failed else 0


def cmd_report(args):
    written = pipeline.write_report(args.experiment, args.out,
                                    bin_width=args.bin_width)
    for path in written:
        print(f"wrote {path}")
    return 0


def _add_filter_flags(sub):
    sub.add_argument("--max-rebuild-count", type=int, dest="max_rebuild_count")
    sub.add_argument("--min-duration", type=float, dest="min_duration")
    sub.add_argument("--max-duration", type=float, dest="max_duration")
    sub.add_argument("--min-nodes", type=int, dest="min_nodes")
    sub.add_argument("--max-nodes", type=int, dest="max_nodes")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="roadeta",
        description="Road-network ETA from unsupervised graph embeddings")
    parser.add_argument("--config", help="flat JSON file with defaults; "
                                         "command-line flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit a synthetic dataset")
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--trips", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shortcut-fraction", type=float, default=0.08)
    p.add_argument("--noise-sigma", type=float, default=0.15)
    p.add_argument("--rebuild-prob", type=float, default=0.03)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-embed", help="train a node-embedding encoder")
    p.add_argument("--data", required=True)
    p.add_argument("--encoder", choices=("gcn", "sage", "gat"), required=True)
    p.add_argument("--layers", type=int, choices=(1, 2, 3), default=2)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--objective", choices=("dgi", "edges"), default="dgi")
    p.add_argument("--strategy", choices=("sum", "virtual"), default="sum")
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_train_embed)

    p = sub.add_parser("embed-routes", help="build the route-vector dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", help="encoder checkpoint; omit for the "
                                        "no-embedding baseline block")
    p.add_argument("--weather-seed", type=int, default=None)
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_embed_routes)

    p = sub.add_parser("train-eta", help="train the travel-time regressor")
    p.add_argument("--routes", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.0001)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_eta)

    p = sub.add_parser("evaluate", help="metrics for a trained regressor")
    p.add_argument("--model", required=True)
    p.add_argument("--routes", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--histogram")
    p.add_argument("--bin-width", type=float, default=10.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-experiment", help="run the full comparison matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weather-seed", type=int, default=None)
    p.add_argument("--layers", type=int, choices=(1, 2, 3), default=2)
    p.add_argument("--embed-epochs", type=int, default=150)
    p.add_argument("--reg-epochs", type=int, default=30)
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--rows", help="comma-separated subset of rows")
    _add_filter_flags(p)
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("report", help="markdown table plus error histograms")
    p.add_argument("--experiment", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bin-width", type=float, default=10.0)
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config_file(args):
    if not args.config:
        return args
    with open(args.config) as fh:
        overrides = json.load(fh)
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) in (None,):
            setattr(args, attr, value)
    return args


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _apply_config_file(args)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - single reporting point
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
