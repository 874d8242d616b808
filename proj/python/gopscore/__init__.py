"""Phoneme-level goodness-of-pronunciation scoring."""

import json

from ._core import (
    Inventory,
    ValidationError,
    ctc_forward,
    default_map_json,
    load_posteriors,
    masked_ctc_forward,
    pass_count,
    score,
    viterbi_align,
)
from ._core import evaluate_json as _evaluate_json

__all__ = [
    "Inventory",
    "ValidationError",
    "ctc_forward",
    "default_map",
    "evaluate",
    "load_posteriors",
    "masked_ctc_forward",
    "pass_count",
    "score",
    "viterbi_align",
]


def default_map(inventory=None):
    """The built-in English confusion map as a dict."""
    return json.loads(default_map_json(inventory or Inventory.english()))


def evaluate(gop, mispronounced, human=None, clamp=True):
    """Threshold search, classification and (with human scores) regression metrics."""
    return json.loads(_evaluate_json(list(gop), list(mispronounced), human, clamp))
