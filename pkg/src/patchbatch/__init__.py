"""Batch-statistics contrastive losses, a numpy Siamese encoder, and a
descriptor-based PatchMatch optical-flow pipeline."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DegenerateBatchError,
    DimensionError,
    DomainError,
    InterpolationError,
    PatchBatchError,
    PipelineError,
    SamplingError,
    StateError,
)
from .flow import DenseFlow, DescriptorField, FlowField, read_pbfl1, read_pgm, write_pbfl1, write_pgm  # noqa: F401
from .interp import densify, edge_cost, geodesic_distances  # noqa: F401
from .losses import DistanceBatch, LossConfig, Variant, batch_loss, batch_loss_grad, pair_loss  # noqa: F401
from .matcher import (  # noqa: F401
    MatchConfig,
    bidirectional_filter,
    border_filter,
    connected_component_filter,
    patchmatch,
)
from .metrics import auc  # noqa: F401
from .net import EncoderModel  # noqa: F401
from .optim import AdaDelta  # noqa: F401
from .pipeline import PipelineConfig, encode_field, flow_metrics, normalize_image, run_flow  # noqa: F401
from .siamese import PairBatch, siamese_distance  # noqa: F401
