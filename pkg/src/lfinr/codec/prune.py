"""Global magnitude pruning with layer-adaptive (LAMP) scores."""
from __future__ import annotations

import numpy as np

from ..model import Model, is_prunable


def lamp_layer(w: np.ndarray) -> np.ndarray:
    """LAMP score of every weight in one layer (same shape as ``w``).

    With weights sorted by ascending squared magnitude (ties by flat index),
    ``score_i = w_i^2 / sum_{j >= i} w_j^2``. The suffix sums accumulate from
    the largest weight downwards.
    """
    flat = np.asarray(w, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ValueError("cannot score an empty layer")
    sq = flat * flat
    order = np.argsort(sq, kind="stable")
    s = sq[order]
    suffix = np.cumsum(s[::-1])[::-1]
    ratio = np.divide(s, suffix, out=np.ones_like(s), where=suffix > 0)
    scores = np.empty_like(sq)
    scores[order] = ratio
    return scores.reshape(np.shape(w))


def lamp_scores(weights) -> list[np.ndarray]:
    return [lamp_layer(w) for w in weights]


def prunable_names(model: Model) -> list[str]:
    return [k for k in model.params if is_prunable(k)]


def global_masks(weights: dict[str, np.ndarray], ratio: float) -> dict[str, np.ndarray]:
    """Zero the ``round(ratio * N)`` lowest-scored weights across all layers.

    Scores tied at the threshold are resolved by (layer order, flat index),
    so the zero count is exact.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"prune ratio must be in [0, 1), got {ratio}")
    names = list(weights)
    scores = [lamp_layer(weights[k]).ravel() for k in names]
    sizes = [s.size for s in scores]
    total = int(sum(sizes))
    k = int(np.floor(ratio * total + 0.5))
    keep = np.ones(total, dtype=bool)
    if k:
        allscores = np.concatenate(scores)
        # Stable sort on the concatenation orders ties by (layer, index).
        keep[np.argsort(allscores, kind="stable")[:k]] = False
    masks, start = {}, 0
    for name, n in zip(names, sizes):
        masks[name] = keep[start:start + n].reshape(np.shape(weights[name])).astype(np.uint8)
        start += n
    return masks


def prune_global(model: Model, ratio: float) -> dict[str, np.ndarray]:
    """Masks (1 = kept) for every prunable tensor of ``model``; does not modify it."""
    return global_masks({k: model.params[k].data for k in prunable_names(model)}, ratio)


def apply_masks(model: Model, masks: dict[str, np.ndarray]) -> None:
    for name, mask in masks.items():
        model.params[name].data *= mask.astype(model.params[name].dtype)


def sparsity(masks: dict[str, np.ndarray]) -> tuple[int, int]:
    """``(zeros, total)`` over all masks."""
    total = sum(m.size for m in masks.values())
    kept = sum(int(m.sum()) for m in masks.values())
    return total - kept, total
