"""Pair-similarity network for person re-identification, written with numpy."""
from .crossnet import (
    NetworkConfig,
    ParameterStore,
    backward_pair,
    build_network,
    forward_pair,
    neighborhood_difference,
    neighborhood_difference_backward,
    patch_summary,
    shape_plan,
)
from .errors import (
    ConfigError,
    FormatError,
    IngestionError,
    NumericError,
    PersonNetError,
    ProtocolError,
    SamplingError,
    ShapeError,
    UsageError,
)

__version__ = "0.1.0"
