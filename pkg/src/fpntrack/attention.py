"""Similarity maps and attention reweighting of pyramid features.

Similarity is a 1x1 cross-correlation: each cell's score is the inner
product of its feature with the template. Reweighting multiplies each
cell's feature vector by its score. Scores are raw inner products, passed
through unclipped and unnormalized by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .pyramid import FeatureMap, FeaturePyramid

MODES = ("tracking", "detection")


@dataclass
class SimilarityMap:
    level: int
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise InvalidInputError("similarity scores must be 2-D")
        if not np.isfinite(self.scores).all():
            raise InvalidInputError("similarity scores contain NaN or Inf")

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    def argmax_cell(self) -> tuple[int, int]:
        flat = int(np.argmax(self.scores))
        return flat // self.width, flat % self.width


def _template_values(template) -> np.ndarray:
    values = np.asarray(getattr(template, "values", template), dtype=np.float64)
    if values.ndim != 1:
        raise InvalidInputError("template must be a 1-D vector")
    return values


def similarity(level_map: FeatureMap, template) -> SimilarityMap:
    """Per-cell inner product of features with the template."""
    values = _template_values(template)
    if values.size != level_map.depth:
        raise InvalidInputError(
            f"template depth {values.size} != feature depth {level_map.depth}"
        )
    scores = level_map.data.astype(np.float64) @ values
    return SimilarityMap(level_map.level, scores)


def reweight(level_map: FeatureMap, sim: SimilarityMap) -> FeatureMap:
    """Scale each cell's feature vector by that cell's similarity score."""
    if sim.scores.shape != (level_map.height, level_map.width):
        raise InvalidInputError(
            f"similarity shape {sim.scores.shape} != spatial shape "
            f"{(level_map.height, level_map.width)}"
        )
    return FeatureMap(level_map.level, level_map.data * sim.scores[:, :, None].astype(np.float32))


def attend_pyramid(
    pyramid: FeaturePyramid,
    template,
    mode: str = "tracking",
    normalize_scores: bool = False,
) -> FeaturePyramid:
    """Apply template attention per level; detection mode is the identity."""
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "detection":
        return pyramid
    out = []
    for fm in pyramid.levels:
        sim = similarity(fm, template)
        if normalize_scores:
            peak = np.abs(sim.scores).max()
            if peak > 0:
                sim = SimilarityMap(sim.level, sim.scores / peak)
        out.append(reweight(fm, sim))
    return FeaturePyramid(
        out,
        strides=pyramid.strides,
        image_height=pyramid.image_height,
        image_width=pyramid.image_width,
    )


def similarity_pyramid(pyramid: FeaturePyramid, template) -> list[SimilarityMap]:
    """Similarity maps for every level, finest first."""
    return [similarity(fm, template) for fm in pyramid.levels]
