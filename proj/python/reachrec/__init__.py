# SPDX-License-Identifier: Apache-2.0
"""Infant reaching recognition from bounding-box streams.

The heavy lifting lives in the C++ extension module; this package re-exports
its surface.
"""

from reachrec._core import (  # noqa: F401
    BoundingBox,
    ConfigError,
    DataError,
    FrameLabel,
    Hand,
    Point2,
    ReachEvent,
    assemble_events,
    center,
    count_params,
    distance,
    events_from_labels,
    evaluate,
    gen,
    infer,
    iou,
    labels_from_events,
    predict_scores,
    split_dataset,
    train,
)

__all__ = [
    "BoundingBox",
    "ConfigError",
    "DataError",
    "FrameLabel",
    "Hand",
    "Point2",
    "ReachEvent",
    "assemble_events",
    "center",
    "count_params",
    "distance",
    "events_from_labels",
    "evaluate",
    "gen",
    "infer",
    "iou",
    "labels_from_events",
    "predict_scores",
    "split_dataset",
    "train",
]

__version__ = "0.1.0"
