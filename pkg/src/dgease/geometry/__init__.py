"""Meshes, agglomerated elements, face groups and geometric metrics."""
from .background import BackgroundMesh, edge_key, fit_curved_boundary
from .elements import (
    AssumptionViolation,
    FaceGroup,
    PolyElement,
    build_face_groups,
    element_from_segments,
    inscribed_radius,
    polygon_element,
    select_star_point,
)
from .partition import dual_graph, partition_graph
from .polymesh import Interface, PolyMesh, agglomerate, cells_as_elements, grouped_mesh

__all__ = [
    "AssumptionViolation",
    "BackgroundMesh",
    "FaceGroup",
    "Interface",
    "PolyElement",
    "PolyMesh",
    "agglomerate",
    "build_face_groups",
    "cells_as_elements",
    "dual_graph",
    "edge_key",
    "element_from_segments",
    "fit_curved_boundary",
    "grouped_mesh",
    "inscribed_radius",
    "partition_graph",
    "polygon_element",
    "select_star_point",
]
