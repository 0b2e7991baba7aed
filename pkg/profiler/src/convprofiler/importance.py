"""Per-layer importance from filter norms, and the mutation noise it implies."""

from __future__ import annotations

import torch
from torch import nn

from .backbone import BlockNet


@torch.no_grad()
def filter_norm_importance(net: BlockNet) -> dict[int, tuple[float, float]]:
    """layer index -> (importance in [0, 1], noise magnitude).

    Importance is the mean absolute filter weight of the stage, normalized by
    the largest such mean; noise magnitude decreases linearly with importance
    so mutation perturbs important layers the least. Equal filters everywhere
    yield uniform importance.
    """
    means: dict[int, float] = {}
    for index, stage in enumerate(net.stages):
        if isinstance(stage, nn.Conv2d):
            means[index] = float(stage.weight.abs().mean())
    top = max(means.values()) if means else 1.0
    ranking = {}
    for index, mean in means.items():
        importance = mean / top if top > 0 else 1.0
        ranking[index] = (importance, 1.0 - 0.75 * importance)
    return ranking
