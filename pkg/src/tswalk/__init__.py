"""Dynamic-graphlet structural similarity plus temporal-structural random walk embeddings."""
from .errors import DegenerateCensusError, ParseError, ValidationError
from .temporal_graph import NodeLabels, TemporalGraph, load_edge_list, load_labels

__version__ = "0.1.0"

__all__ = [
    "DegenerateCensusError",
    "NodeLabels",
    "ParseError",
    "TemporalGraph",
    "ValidationError",
    "load_edge_list",
    "load_labels",
]
