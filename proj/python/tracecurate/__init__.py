"""Reasoning-trace curation: segmentation, scoring, revision and sampling."""

import json as _json

from . import _core
from ._core import (
    BackendError,
    ConfigError,
    DataError,
    DependencyError,
    Error,
    NgramIndex,
    alpha,
    count_tokens,
    default_markers,
    extract_boxed,
    has_boxed_answer,
    kl_divergence,
    percent_change,
    quality_score,
)

__version__ = _core.__version__


def extract_thinking(answer, open="<think>", close="</think>"):
    return _json.loads(_core.extract_thinking(answer, open, close))


def segment(text, markers=(), case_sensitive=True, require_sentence_start=True):
    return _json.loads(
        _core.segment(text, list(markers), case_sensitive, require_sentence_start)
    )


def revise(texts, verdicts, final_answer, independent):
    return _json.loads(
        _core.revise(list(texts), [list(v) for v in verdicts], final_answer,
                     {int(k): bool(v) for k, v in independent.items()})
    )


def select(items, d, epsilon=1e-9):
    """items: iterable of (id, quality_score, subtrajectory_count)."""
    return _json.loads(_core.select([tuple(i) for i in items], d, epsilon))


def _config_text(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else _json.dumps(config)


def run_stage(stage, input, output, config=None, force=False):
    return _json.loads(
        _core.run_stage(stage, str(input), str(output), _config_text(config), force)
    )


def run_pipeline(input, out_dir, config=None):
    return _json.loads(_core.run_pipeline(str(input), str(out_dir), _config_text(config)))
