"""标量场 -> 有序合并树 -> Euler 巡游曲线 -> Fréchet 匹配 -> 单调 interleaving。

匹配到 interleaving 的构造不假定正确：结果必须通过全部校验器，否则报错。
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from .config import PipelineConfig
from .errors import InterleavingValidationError, Violation
from .fields import ScalarField2D, merge_tree_from_field, order_leaves, simplify
from .frechet import EulerTourCurve, FrechetMatching, euler_tour, frechet_delta, frechet_matching
from .interleaving import Interleaving, ShiftMap, validate_interleaving
from .mergetree import OrderedMergeTree, TreePoint, ancestor_at_height

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Comparison:
    tree_a: OrderedMergeTree
    tree_b: OrderedMergeTree
    curve_a: EulerTourCurve
    curve_b: EulerTourCurve
    frechet: float
    delta: float
    matching: FrechetMatching
    interleaving: Interleaving


def tree_from_field(field: ScalarField2D, config: Optional[PipelineConfig] = None) -> OrderedMergeTree:
    config = config or PipelineConfig()
    t = merge_tree_from_field(field, config.connectivity)
    if config.persistence > 0:
        t = simplify(t, config.persistence)
    return order_leaves(t, field, config.curve)


def _leaf_images(
    src: OrderedMergeTree,
    tgt: OrderedMergeTree,
    tgt_curve: EulerTourCurve,
    matched: Callable[[float], float],
    delta: float,
) -> Tuple[Dict[str, TreePoint], List[Violation]]:
    Q = tgt_curve.values
    last_seg = len(Q) - 2
    images: Dict[str, TreePoint] = {}
    problems: List[Violation] = []
    for i, leaf in enumerate(src.leaves):
        u = matched(float(2 * i + 1))
        j = max(0, min(int(math.floor(u)), last_seg))
        # 巡游的每一段都有一个端点是叶子（奇数下标）
        end = j if j % 2 == 1 else j + 1
        x = tgt_curve.vertices[end]
        top = src.height(leaf) + delta
        if tgt.height(x) > top:
            problems.append(
                Violation("matching", leaf, f"matched leaf {x} at {tgt.height(x)} is above f({leaf}) + delta = {top}")
            )
            continue
        h = Q[j] + (u - j) * (Q[j + 1] - Q[j])
        h = min(max(h, tgt.height(x)), top)
        y = ancestor_at_height(tgt, tgt.point(x), h)
        images[leaf] = ancestor_at_height(tgt, y, top)
    return images, problems


def interleaving_from_matching(
    t: OrderedMergeTree,
    t2: OrderedMergeTree,
    matching: FrechetMatching,
    delta: float,
) -> Interleaving:
    ca, cb = euler_tour(t), euler_tour(t2)
    alpha, pa = _leaf_images(t, t2, cb, matching.t_at, delta)
    beta, pb = _leaf_images(t2, t, ca, matching.s_at, delta)
    if pa or pb:
        raise InterleavingValidationError(
            "matching does not induce a shift map",
            [Violation(v.rule, f"alpha:{v.subject}", v.message) for v in pa]
            + [Violation(v.rule, f"beta:{v.subject}", v.message) for v in pb],
        )
    i = Interleaving(ShiftMap(delta, t, t2, alpha), ShiftMap(delta, t2, t, beta))
    violations = validate_interleaving(i)
    if violations:
        raise InterleavingValidationError("constructed interleaving is invalid", violations)
    return i


def compare_trees(
    t: OrderedMergeTree,
    t2: OrderedMergeTree,
    pad: float = 1e-9,
    tolerance: float = 1e-9,
) -> Comparison:
    ca, cb = euler_tour(t), euler_tour(t2)
    fd = frechet_delta(ca, cb, tolerance)
    delta = 0.0 if fd == 0 else fd + pad
    matching = frechet_matching(ca, cb, delta)
    i = interleaving_from_matching(t, t2, matching, delta)
    logger.info(
        "frechet %.9g -> delta %.9g (%d vs %d leaves)",
        fd,
        delta,
        len(t.leaves),
        len(t2.leaves),
    )
    return Comparison(t, t2, ca, cb, fd, delta, matching, i)


def compare_fields(a: ScalarField2D, b: ScalarField2D, config: Optional[PipelineConfig] = None) -> Comparison:
    config = config or PipelineConfig()
    ta = tree_from_field(a, config)
    tb = tree_from_field(b, config)
    return compare_trees(ta, tb, config.delta_pad, config.frechet_tolerance)
