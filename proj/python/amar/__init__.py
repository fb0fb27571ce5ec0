"""Python access to the A-MAR engine."""

import json

from ._amar import (
    AmarError,
    bleu_n,
    chunk_spans,
    dataset_stats_json,
    fuse,
    name_similarity,
    rouge_l,
    run_cli,
    softmax_normalize,
)


def dataset_stats(path):
    return json.loads(dataset_stats_json(str(path)))


def cli(*args):
    """Run a command line. Returns (exit_code, stdout, stderr)."""
    return run_cli([str(a) for a in args])


__all__ = [
    "AmarError",
    "bleu_n",
    "chunk_spans",
    "cli",
    "dataset_stats",
    "fuse",
    "name_similarity",
    "rouge_l",
    "run_cli",
    "softmax_normalize",
]
