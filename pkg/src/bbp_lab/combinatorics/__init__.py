"""Glued-polygon surface graphs: construction, contraction, enumeration."""

from .surface import (
    CombinatoricsError,
    Edge,
    RibbonGraph,
    glue_polygons,
)
from .contraction import Diagram, okounkov_contract, classify_diagram, DiagramClassification
from .enumeration import (
    canonical_key,
    enumerate_gluings,
    diagrams_for,
    enumerate_small_diagrams,
    trivalent_count_bound,
)

__all__ = [
    "CombinatoricsError",
    "Edge",
    "RibbonGraph",
    "glue_polygons",
    "Diagram",
    "okounkov_contract",
    "classify_diagram",
    "DiagramClassification",
    "canonical_key",
    "enumerate_gluings",
    "diagrams_for",
    "enumerate_small_diagrams",
    "trivalent_count_bound",
]
