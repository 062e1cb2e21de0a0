from . import autodiff
from .autodiff import Tensor, backward, no_grad, set_debug_check_finite
from .checkpoint import checkpoint_digest, load_checkpoint, save_checkpoint
from .init import orthogonal
from .layers import (
    GraphBatch,
    GraphLayerConfig,
    Z_ENCODING_DIM,
    encode_z,
    graph_attention,
    graph_layer,
    init_graph_layer,
    init_linear,
    init_mlp,
    init_z_encoder,
    layer_norm,
    linear,
    mlp,
    segment_softmax,
)

__all__ = [
    "autodiff",
    "Tensor",
    "backward",
    "no_grad",
    "set_debug_check_finite",
    "checkpoint_digest",
    "load_checkpoint",
    "save_checkpoint",
    "orthogonal",
    "GraphBatch",
    "GraphLayerConfig",
    "Z_ENCODING_DIM",
    "encode_z",
    "graph_attention",
    "graph_layer",
    "init_graph_layer",
    "init_linear",
    "init_mlp",
    "init_z_encoder",
    "layer_norm",
    "linear",
    "mlp",
    "segment_softmax",
]
