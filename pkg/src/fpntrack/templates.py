"""Object templates: center read, sample means, and closed-form ridge regression.

The discriminative template is the minimizer of
``||A t - y||^2 + lambda ||t||^2`` where row 0 of A is the object feature
(label 1) and the remaining rows are negatives (label 0). The closed form
``t = (A^T A + lambda I)^{-1} A^T y`` defines the semantics; the solve goes
through a linear system rather than an explicit inverse. The backward pass
through the solve is analytic and checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, SolverError
from .pyramid import (
    DEFAULT_LEVEL_ASSIGN,
    BoundingBox,
    FeaturePyramid,
    LevelAssignConfig,
    assign_level,
    center_cell,
    extract_template,
)

TEMPLATE_KINDS = ("center", "mean_pos", "mean_diff", "ridge")

# Refuse closed-form solves when the normal matrix is this badly conditioned.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class TemplateVector:
    values: np.ndarray
    kind: str = "center"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 1:
            raise InvalidInputError("template must be a 1-D vector")
        if not np.isfinite(self.values).all():
            raise InvalidInputError("template contains NaN or Inf")
        if self.kind not in TEMPLATE_KINDS:
            raise InvalidInputError(f"unknown template kind {self.kind!r}")


@dataclass
class RegressionProblem:
    """Data matrix A (positive row first, then negatives), labels e1, and lambda."""

    data_matrix: np.ndarray
    labels: np.ndarray
    lam: float

    def __post_init__(self):
        self.data_matrix = np.asarray(self.data_matrix, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.data_matrix.ndim != 2:
            raise InvalidInputError("data matrix must be 2-D")
        rows, cols = self.data_matrix.shape
        if self.labels.shape != (rows,):
            raise InvalidInputError("labels length must match data rows")
        expected = np.zeros(rows)
        expected[0] = 1.0
        if not np.array_equal(self.labels, expected):
            raise InvalidInputError("labels must be (1, 0, ..., 0)")
        if self.lam < 0:
            raise InvalidInputError("lambda must be >= 0")
        if self.lam == 0 and rows < cols:
            raise InvalidInputError("lambda must be > 0 for underdetermined problems")

    @classmethod
    def from_samples(
        cls, positive: np.ndarray, negatives: Sequence[np.ndarray], lam: float
    ) -> "RegressionProblem":
        rows = [np.asarray(positive, dtype=np.float64)]
        rows.extend(np.asarray(n, dtype=np.float64) for n in negatives)
        a = np.stack(rows)
        y = np.zeros(a.shape[0])
        y[0] = 1.0
        return cls(a, y, lam)

    def objective(self, t: np.ndarray) -> float:
        r = self.data_matrix @ t - self.labels
        return float(r @ r + self.lam * (t @ t))


def _normal_matrix(problem: RegressionProblem) -> np.ndarray:
    a = problem.data_matrix
    return a.T @ a + problem.lam * np.eye(a.shape[1])


def solve_ridge(problem: RegressionProblem) -> TemplateVector:
    """Minimize ||A t - y||^2 + lambda ||t||^2 in closed form."""
    g = _normal_matrix(problem)
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SolverError(
            f"normal matrix condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}; "
            "increase lambda"
        )
    t = np.linalg.solve(g, problem.data_matrix.T @ problem.labels)
    return TemplateVector(t, kind="ridge")


def ridge_backward(problem: RegressionProblem, upstream: np.ndarray) -> np.ndarray:
    """Gradient of L = g . solve_ridge(A) with respect to the entries of A.

    With M = (A^T A + lambda I)^{-1}, h = M g and t the solved template:
    dL/dA = (y - A t) h^T - (A h) t^T.
    """
    g = np.asarray(upstream, dtype=np.float64)
    a = problem.data_matrix
    if g.shape != (a.shape[1],):
        raise InvalidInputError("upstream gradient must be a D-vector")
    normal = _normal_matrix(problem)
    cond = np.linalg.cond(normal)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SolverError(
            f"normal matrix condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}; "
            "increase lambda"
        )
    t = np.linalg.solve(normal, a.T @ problem.labels)
    h = np.linalg.solve(normal, g)
    residual = problem.labels - a @ t
    return np.outer(residual, h) - np.outer(a @ h, t)


def template_mean_pos(positives: Sequence[np.ndarray]) -> TemplateVector:
    if len(positives) == 0:
        raise InvalidInputError("need at least one positive sample")
    mean = np.mean(np.stack([np.asarray(p, dtype=np.float64) for p in positives]), axis=0)
    return TemplateVector(mean, kind="mean_pos")


def template_mean_diff(
    positives: Sequence[np.ndarray], negatives: Sequence[np.ndarray]
) -> TemplateVector:
    if len(positives) == 0 or len(negatives) == 0:
        raise InvalidInputError("need at least one positive and one negative sample")
    pos = np.mean(np.stack([np.asarray(p, dtype=np.float64) for p in positives]), axis=0)
    neg = np.mean(np.stack([np.asarray(n, dtype=np.float64) for n in negatives]), axis=0)
    return TemplateVector(pos - neg, kind="mean_diff")


def _cell_centers(pyramid: FeaturePyramid, level: int) -> tuple[np.ndarray, np.ndarray]:
    fm = pyramid.level_map(level)
    stride = pyramid.stride(level)
    cys = (np.arange(fm.height) + 0.5) * stride
    cxs = (np.arange(fm.width) + 0.5) * stride
    return cys, cxs


def sample_negatives(
    pyramid: FeaturePyramid,
    gt_box: BoundingBox,
    q: int,
    seed: int,
    balance_levels: bool = False,
) -> tuple[list[np.ndarray], int]:
    """Sample q features across all levels whose cell centers fall outside gt_box.

    Returns (features, shortfall). When fewer than q cells are eligible, all
    of them are returned and the shortfall says how many were missing.
    """
    if q < 1:
        raise InvalidInputError("q must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed & ((1 << 64) - 1)))
    per_level: list[list[np.ndarray]] = []
    for fm in pyramid.levels:
        cys, cxs = _cell_centers(pyramid, fm.level)
        out_y = (cys < gt_box.y) | (cys >= gt_box.y2)
        out_x = (cxs < gt_box.x) | (cxs >= gt_box.x2)
        outside = np.outer(out_y, np.ones_like(out_x, dtype=bool)) | np.outer(
            np.ones_like(out_y, dtype=bool), out_x
        )
        rr, cc = np.nonzero(outside)
        per_level.append([fm.data[r, c].astype(np.float64) for r, c in zip(rr, cc)])
    if balance_levels:
        picked: list[np.ndarray] = []
        share = max(1, q // len(per_level))
        for feats in per_level:
            idx = rng.permutation(len(feats))[:share]
            picked.extend(feats[i] for i in idx)
        pool = picked
        rng.shuffle(pool)
        result = pool[:q]
    else:
        pool = [f for feats in per_level for f in feats]
        idx = rng.permutation(len(pool))[:q]
        result = [pool[i] for i in idx]
    return result, max(0, q - len(result))


def sample_positives(
    pyramid: FeaturePyramid,
    gt_box: BoundingBox,
    p: int,
    seed: int,
    config: LevelAssignConfig = DEFAULT_LEVEL_ASSIGN,
) -> tuple[list[np.ndarray], int]:
    """Sample p in-box features from the assigned level; the center cell always leads."""
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    level = assign_level(gt_box, pyramid.num_levels, config)
    labels = pyramid.level_labels
    level = min(max(level, labels[0]), labels[-1])
    fm = pyramid.level_map(level)
    row0, col0 = center_cell(gt_box, pyramid, level)
    cys, cxs = _cell_centers(pyramid, level)
    in_y = (cys >= gt_box.y) & (cys < gt_box.y2)
    in_x = (cxs >= gt_box.x) & (cxs < gt_box.x2)
    rr, cc = np.nonzero(np.outer(in_y, in_x))
    cells = [(r, c) for r, c in zip(rr, cc) if (r, c) != (row0, col0)]
    rng = np.random.Generator(np.random.Philox(key=seed & ((1 << 64) - 1)))
    idx = rng.permutation(len(cells))[: p - 1]
    picked = [(row0, col0)] + [cells[i] for i in idx]
    feats = [fm.data[r, c].astype(np.float64) for r, c in picked]
    return feats, max(0, p - len(feats))


def build_template(
    pyramid: FeaturePyramid,
    box: BoundingBox,
    kind: str,
    *,
    lam: float = 0.1,
    num_negatives: int = 256,
    num_positives: int = 16,
    seed: int = 0,
    normalize: bool = False,
    balance_levels: bool = False,
    level_config: LevelAssignConfig = DEFAULT_LEVEL_ASSIGN,
) -> TemplateVector:
    """Build a template of the requested kind from the first frame."""
    if kind not in TEMPLATE_KINDS:
        raise InvalidInputError(f"unknown template kind {kind!r}")
    if kind == "center":
        return TemplateVector(extract_template(pyramid, box, level_config), kind="center")
    if kind == "mean_pos":
        pos, _ = sample_positives(pyramid, box, num_positives, seed, level_config)
        return template_mean_pos(pos)
    neg, _ = sample_negatives(pyramid, box, num_negatives, seed, balance_levels)
    if not neg:
        raise SolverError("no negative samples available outside the box")
    if kind == "mean_diff":
        pos, _ = sample_positives(pyramid, box, num_positives, seed, level_config)
        return template_mean_diff(pos, neg)
    positive = extract_template(pyramid, box, level_config)
    if normalize:
        positive = _unit(positive)
        neg = [_unit(n) for n in neg]
    problem = RegressionProblem.from_samples(positive, neg, lam)
    return solve_ridge(problem)


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v if n == 0 else v / n
