"""Road-network travel-time estimation from unsupervised graph embeddings.

Submodules: ``roads`` (data layer), ``sparse``/``optim``/``tensorio``/
``gradcheck`` (numeric substrate), ``encoders`` (GCN / GraphSAGE / GAT),
``dgi`` and ``edge_contrast`` (unsupervised training), ``routes``
(aggregation strategies), ``regression`` (MLP head and metrics), ``synth``
(synthetic city), ``pipeline`` (experiment drivers) and ``cli``.
"""

from .roads import (RoadGraph, SegmentFeatures, Trip, TripFilterConfig,
                    dataset_stats, effective_route_length, encode_features,
                    filter_trips, load_graph, load_trips, save_graph,
                    save_trips)
from .sparse import SparseAdjacency, normalize_adjacency, spmm
from .optim import AdamState, ParamStore, adam_step
from .gradcheck import finite_difference_check
from .encoders import Encoder, EncoderConfig, GraphContext, encoder_forward
from .dgi import (DgiModel, DgiTrainConfig, corrupt_features, dgi_loss,
                  discriminator_score, embed_nodes, readout_summary, train_dgi)
from .edge_contrast import EdgeContrastConfig, train_edge_contrast
from .routes import (aggregate_sum, augment_route_vector,
                     extend_graph_virtual_nodes, virtual_node_embeddings)
from .regression import (MetricsReport, Mlp, MlpConfig, SplitSpec,
                         compute_metrics, error_histogram, mlp_forward,
                         split_dataset, train_regressor)
from .synth import CitySpec, TravelTimeModel, WeatherModel, generate_city, \
    generate_trips
from .pipeline import EXPERIMENT_ROWS, PipelineConfig, run_experiment

__version__ = "0.1.0"
