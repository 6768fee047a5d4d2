"""Deterministic synthetic scenes standing in for a CNN backbone.

Objects are identity embeddings painted onto pyramid cells whose
receptive-field centers fall inside the object box, scaled by a separable
cosine window (1 at the box center, 0 at the edges). Noise and jitter use
the counter-based Philox generator keyed on (seed, frame) so frames can be
rendered in any order, or in parallel, with identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .pyramid import BoundingBox, FeatureMap, FeaturePyramid, Mask, extract_template

Trajectory = Callable[[int], Optional[BoundingBox]]

_KEY_MASK = (1 << 64) - 1


def philox(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for a (seed, stream) pair."""
    key = ((seed & _KEY_MASK) << 64) | (stream & _KEY_MASK)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class SceneObject:
    identity: np.ndarray
    trajectory: Trajectory
    is_target: bool = False

    def __post_init__(self):
        self.identity = np.asarray(self.identity, dtype=np.float64)
        norm = np.linalg.norm(self.identity)
        if not math.isclose(norm, 1.0, rel_tol=1e-6):
            raise InvalidInputError(f"identity must be unit norm, got {norm}")


@dataclass
class SceneSpec:
    image_height: int
    image_width: int
    num_frames: int
    objects: list[SceneObject] = field(default_factory=list)
    noise_sigma: float = 0.0
    distractor_overlap: float = 0.0
    seed: int = 0
    levels: tuple[int, ...] = (2, 3, 4, 5)

    def __post_init__(self):
        if self.num_frames < 1:
            raise InvalidInputError("num_frames must be >= 1")
        if self.noise_sigma < 0:
            raise InvalidInputError("noise_sigma must be >= 0")
        targets = [i for i, o in enumerate(self.objects) if o.is_target]
        if len(targets) > 1:
            raise InvalidInputError("at most one target object allowed")
        if self.objects and not targets:
            raise InvalidInputError("exactly one object must be the target")

    @property
    def depth(self) -> int:
        if not self.objects:
            return 8
        return int(self.objects[0].identity.size)

    @property
    def target_index(self) -> int:
        for i, o in enumerate(self.objects):
            if o.is_target:
                return i
        raise InvalidInputError("scene has no target")


def _cosine_window(coords: np.ndarray, center: float, half: float) -> np.ndarray:
    u = np.clip((coords - center) / half, -1.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * u))


def render_frame(
    spec: SceneSpec, frame: int
) -> tuple[FeaturePyramid, list[Optional[BoundingBox]], list[Optional[Mask]]]:
    """Render one frame: pyramid plus per-object groundtruth boxes and masks.

    Objects later in the list occlude earlier ones. A ``None`` box means the
    object is absent in this frame.
    """
    if not 0 <= frame < spec.num_frames:
        raise InvalidInputError(f"frame {frame} outside [0, {spec.num_frames})")
    boxes = [obj.trajectory(frame) for obj in spec.objects]
    rng = philox(spec.seed, frame)
    depth = spec.depth
    maps = []
    for lvl in spec.levels:
        stride = 2 ** lvl
        h = math.ceil(spec.image_height / stride)
        w = math.ceil(spec.image_width / stride)
        cys = (np.arange(h) + 0.5) * stride
        cxs = (np.arange(w) + 0.5) * stride
        data = np.zeros((h, w, depth), dtype=np.float64)
        for obj, box in zip(spec.objects, boxes):
            if box is None:
                continue
            in_y = (cys >= box.y) & (cys < box.y2)
            in_x = (cxs >= box.x) & (cxs < box.x2)
            if not (in_y.any() and in_x.any()):
                continue
            fy = _cosine_window(cys, box.cy, box.h / 2)
            fx = _cosine_window(cxs, box.cx, box.w / 2)
            falloff = np.outer(fy * in_y, fx * in_x)
            inside = np.outer(in_y, in_x)
            data[inside] = falloff[inside, None] * obj.identity
        if spec.noise_sigma > 0:
            data += rng.normal(0.0, spec.noise_sigma, size=data.shape)
        maps.append(FeatureMap(lvl, data))
    pyramid = FeaturePyramid(
        maps, image_height=spec.image_height, image_width=spec.image_width
    )
    masks = [
        Mask.from_box(b, spec.image_height, spec.image_width) if b is not None else None
        for b in boxes
    ]
    return pyramid, boxes, masks


def jittered_boxes(
    boxes: Sequence[Optional[BoundingBox]],
    jitter: float,
    k: int,
    seed: int,
) -> list[BoundingBox]:
    """k candidate boxes per visible object: the true box plus jittered copies."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    rng = philox(seed)
    out: list[BoundingBox] = []
    for box in boxes:
        if box is None:
            continue
        out.append(box)
        for _ in range(k - 1):
            dx = rng.normal(0.0, jitter * box.w)
            dy = rng.normal(0.0, jitter * box.h)
            sw = math.exp(rng.normal(0.0, jitter))
            sh = math.exp(rng.normal(0.0, jitter))
            out.append(BoundingBox(box.x + dx, box.y + dy, box.w * sw, box.h * sh))
    return out


def cosine_confidence(feature: np.ndarray, template: np.ndarray) -> float:
    """Cosine similarity mapped to [0, 1]; zero vectors score 0."""
    f = np.asarray(feature, dtype=np.float64)
    t = np.asarray(template, dtype=np.float64)
    nf = np.linalg.norm(f)
    nt = np.linalg.norm(t)
    if nf == 0 or nt == 0:
        return 0.0
    cos = float(np.dot(f, t) / (nf * nt))
    return min(max((cos + 1.0) / 2.0, 0.0), 1.0)


def score_candidates(pyramid: FeaturePyramid, boxes: Sequence[BoundingBox], template) -> list:
    """Score candidate boxes against a template via center-feature cosine."""
    from .tracker import Detection

    values = getattr(template, "values", template)
    dets = []
    for box in boxes:
        conf = cosine_confidence(extract_template(pyramid, box), values)
        dets.append(Detection(box=box, confidence=conf))
    return dets


def synth_candidates(
    pyramid: FeaturePyramid,
    gt_boxes: Sequence[Optional[BoundingBox]],
    template,
    jitter: float,
    k: int,
    seed: int,
) -> list:
    """Candidate detections for one frame, scored against the active template."""
    boxes = jittered_boxes(gt_boxes, jitter, k, seed)
    return score_candidates(pyramid, boxes, template)
