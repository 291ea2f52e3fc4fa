"""Python bindings for the flatcrit core library."""

from ._core import (
    FlatcritError,
    Map,
    NiceInterval,
    PressureBracket,
    Scheme,
    TransferModel,
    birkhoff_average,
    build_scheme,
    clt,
    config_hash,
    correlations,
    execute,
    nice_interval,
    parse_config,
    tail_statistics,
)

__all__ = [
    "FlatcritError",
    "Map",
    "NiceInterval",
    "PressureBracket",
    "Scheme",
    "TransferModel",
    "birkhoff_average",
    "build_scheme",
    "clt",
    "config_hash",
    "correlations",
    "execute",
    "nice_interval",
    "parse_config",
    "tail_statistics",
]
