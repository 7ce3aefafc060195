"""Mesh and background-mesh JSON files."""
from __future__ import annotations

import json

import numpy as np

from ..curves import GeometryError, levelset_from_dict
from .background import BackgroundMesh, edge_key
from .polymesh import PolyMesh

FORMAT = "dgease-mesh"
VERSION = 1


def background_to_dict(bg: BackgroundMesh):
    boundary = [{"edge": [int(i), int(j)], "label": lab, "levelset_id": bg.curved.get((i, j))}
                for (i, j), lab in sorted(bg.boundary.items())]
    interior_arcs = [{"edge": [int(i), int(j)], "levelset_id": int(lid)}
                     for (i, j), lid in sorted(bg.curved.items()) if (i, j) not in bg.boundary]
    return {
        "vertices": bg.vertices.tolist(),
        "triangles": bg.triangles.tolist(),
        "cell_region": bg.cell_region.tolist(),
        "levelsets": [ls.to_dict() for ls in bg.levelsets],
        "boundary": boundary,
        "interior_arcs": interior_arcs,
    }


def background_from_dict(d):
    try:
        boundary, curved = {}, {}
        for e in d.get("boundary", []):
            key = edge_key(*e["edge"])
            boundary[key] = e["label"]
            if e.get("levelset_id") is not None:
                curved[key] = int(e["levelset_id"])
        for e in d.get("interior_arcs", []):
            curved[edge_key(*e["edge"])] = int(e["levelset_id"])
        levelsets = [levelset_from_dict(ls) for ls in d.get("levelsets", [])]
        return BackgroundMesh(np.asarray(d["vertices"], dtype=float), np.asarray(d["triangles"]), boundary, curved,
                              levelsets, d.get("cell_region"))
    except KeyError as exc:
        raise GeometryError(f"mesh file is missing field {exc}") from None


def mesh_to_dict(mesh: PolyMesh):
    out = {"format": FORMAT, "version": VERSION, **background_to_dict(mesh.background)}
    out["elements"] = [
        {
            "id": K.id,
            "cells": K.cells.tolist(),
            "p": int(K.degree),
            "flags": sorted(K.flags),
            "face_groups": [{"segments": [int(i) for i in g.segments], "star_point": g.star_point.tolist(),
                             "min_m_dot_n": g.min_m_dot_n, "forced": bool(g.forced)} for g in K.face_groups],
        }
        for K in mesh.elements
    ]
    return out


def mesh_from_dict(d, regroup=False, star="optimize", force=False):
    """PolyMesh from a dict; stored face groups are reused unless `regroup`."""
    bg = background_from_dict(d)
    if "elements" not in d:
        raise GeometryError("mesh file has no elements; agglomerate the background first")
    owner = -np.ones(bg.n_cells, dtype=np.int64)
    for e in d["elements"]:
        owner[np.asarray(e["cells"], dtype=np.int64)] = e["id"]
    if np.any(owner < 0):
        raise GeometryError("some background cells belong to no element")
    groups = None
    if not regroup:
        groups = [[(g["segments"], g["star_point"], g.get("forced", False)) for g in e["face_groups"]]
                  for e in sorted(d["elements"], key=lambda e: e["id"])]
    mesh = PolyMesh(bg, owner, star=star, force=force, face_groups=groups)
    for e in d["elements"]:
        mesh.elements[e["id"]].degree = int(e.get("p", 1))
    return mesh


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh)


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def save_mesh(mesh, path):
    _dump(mesh_to_dict(mesh), path)


def load_mesh(path, **kw):
    return mesh_from_dict(_load(path), **kw)


def save_background(bg, path):
    _dump(background_to_dict(bg), path)


def load_background(path):
    return background_from_dict(_load(path))
