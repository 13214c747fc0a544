# Copyright 2026 The csdet Authors.
# Licensed under the Apache License, Version 2.0.
"""Cross-supervised object detection on a synthetic shape world."""

from ._core import (
    CsdetError,
    Taxonomy,
    aggregate,
    average_precision,
    build_taxonomy,
    evaluate,
    gen_data,
    generate_anchors,
    iou,
    load_taxonomy,
    nms,
    run_demo,
    train,
)

__all__ = [
    "CsdetError",
    "Taxonomy",
    "aggregate",
    "average_precision",
    "build_taxonomy",
    "evaluate",
    "gen_data",
    "generate_anchors",
    "iou",
    "load_taxonomy",
    "nms",
    "run_demo",
    "train",
]
