"""Panoptic symbol spotting for vector CAD drawings."""

import json

from ._core import (
    CadspotError,
    arc_lengths,
    hungarian,
    panoptic_quality,
    sample,
    synth,
)
from . import _core

__all__ = [
    "CadspotError",
    "arc_lengths",
    "evaluate",
    "hungarian",
    "panoptic_quality",
    "reconstruct",
    "sample",
    "spot",
    "synth",
]


def spot(svg, predictions, window=140.0, step=70.0, threads=1):
    """Sliding-window labeling of an SVG drawing from recorded window predictions."""
    return json.loads(_core.spot_json(svg, predictions, window, step, threads))


def evaluate(svg, gt, pred):
    """Panoptic quality report; gt and pred are annotation JSON strings."""
    return json.loads(_core.panoptic_report_json(svg, gt, pred))


def reconstruct(svg, labels):
    """Wall, door and window parameters from a labeled drawing."""
    return json.loads(_core.reconstruct_json(svg, labels))
