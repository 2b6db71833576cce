"""Geometric-set guided contrastive pre-training on synthetic RGB-D scenes.

Configs and scene specs are plain dicts with the same schema as the JSON
files accepted by the ``geoset`` command-line tool.
"""

import json

from . import _core
from ._core import (
    GeosetError,
    GeosetIoError,
    InvalidArgument,
    build_match_index,
    coding_rate,
    compute_overlap,
    estimate_normals,
    knn_graph,
    look_at,
    mine_pairs,
    normalize,
    pixel_infonce,
    read_labels,
    read_ply,
    poly_lr,
    project_geo_sets,
    project_point,
    segment,
    set_infonce,
)

__all__ = [
    "GeosetError",
    "GeosetIoError",
    "InvalidArgument",
    "build_match_index",
    "coding_rate",
    "compute_overlap",
    "estimate_normals",
    "generate_scene",
    "knn_graph",
    "look_at",
    "mine_pairs",
    "normalize",
    "pixel_infonce",
    "read_labels",
    "read_ply",
    "poly_lr",
    "project_geo_sets",
    "project_point",
    "render_views",
    "segment",
    "set_infonce",
    "train_pipeline",
]


def generate_scene(spec):
    """Sample a synthetic scene. Returns (positions, normals, face_labels)."""
    return _core.generate_scene(json.dumps(spec))


def render_views(config):
    """Render the cameras of a pipeline config; each view is {camera, depth}."""
    return _core.render_views(json.dumps(config))


def train_pipeline(config):
    """Run every stage of the synthetic pipeline and return the trained
    embeddings, the training log and summary metrics."""
    return _core.train_pipeline(json.dumps(config))
