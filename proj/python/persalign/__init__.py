"""Population-level persona alignment: importance sampling followed by optimal transport."""

import json

from . import _core
from ._core import (
    PersalignError,
    amw,
    contrastive_loss,
    cosine_similarity,
    cost_matrix,
    entropic_gap,
    exact_ot,
    frechet_distance,
    importance_weights,
    mae_corr,
    mmd_squared,
    sinkhorn,
    sliced_wasserstein,
    top_k,
)

__all__ = [
    "PersalignError",
    "align",
    "amw",
    "contrastive_loss",
    "cosine_similarity",
    "cost_matrix",
    "default_config",
    "entropic_gap",
    "exact_ot",
    "frechet_distance",
    "importance_weights",
    "mae_corr",
    "metric_report",
    "mmd_squared",
    "sinkhorn",
    "sliced_wasserstein",
    "top_k",
]


def default_config():
    return json.loads(_core.default_config_json())


def align(pool, reference, ids=None, config=None, include_timings=False):
    """Select N' rows of `pool` that match `reference`.

    Returns (selected ids in draw order, report dict). Rows are named by `ids`
    when given, otherwise by their row index.
    """
    selected, report = _core.align(
        pool,
        reference,
        list(ids) if ids is not None else [],
        json.dumps(config) if config else "",
        include_timings,
    )
    return selected, json.loads(report)


def metric_report(x, y, sw_projections=512, seed=0, mmd_bandwidth=None):
    return json.loads(_core.metric_report(x, y, sw_projections, seed, mmd_bandwidth))
