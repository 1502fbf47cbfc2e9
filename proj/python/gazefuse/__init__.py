"""Gaze-offset and embedding score fusion for eye-movement biometrics."""

import json

from ._gazefuse import (
    GazefuseError,
    __version__,
    angular_offset,
    default_config,
    eer,
    frr_at_far,
    idt_fixations,
    offset_similarity,
    render_table,
    sg_differentiate,
    synth,
    three_score_features,
    two_score_features,
    weighted_fuse,
)
from ._gazefuse import run_pipeline as _run_pipeline


def run(config=None, force=False, **overrides):
    """Run the full pipeline. `config` is a dict or JSON string; keyword overrides win."""
    if config is None:
        config = {}
    elif isinstance(config, str):
        config = json.loads(config)
    merged = {**config, **overrides}
    for key in ("manifest", "embeddings", "out_dir"):
        if merged.get(key) is not None:
            merged[key] = str(merged[key])
    return _run_pipeline(json.dumps(merged), force)


def load_report(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


__all__ = [
    "GazefuseError",
    "__version__",
    "angular_offset",
    "default_config",
    "eer",
    "frr_at_far",
    "idt_fixations",
    "load_report",
    "offset_similarity",
    "render_table",
    "run",
    "sg_differentiate",
    "synth",
    "three_score_features",
    "two_score_features",
    "weighted_fuse",
]
