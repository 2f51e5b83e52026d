"""Path-reporting distance oracles, interactive preservers and emulators on weighted graphs."""
from .graph import PathResult, WeightedGraph, load_graph, save_graph, validate_path
from .composer import build_preset, compose_prdo

__all__ = ["PathResult", "WeightedGraph", "load_graph", "save_graph", "validate_path",
           "build_preset", "compose_prdo"]
