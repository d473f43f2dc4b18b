from __future__ import annotations

import os
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Sequence, Tuple

import numpy as np
import pytest

from parkview.interleaving import Interleaving, ShiftMap
from parkview.mergetree import Node, OrderedMergeTree, TreePoint, ancestor_at_height, lca, read_tree

DATA = Path(__file__).resolve().parents[1] / "data"

# PARKVIEW_FULL=1 跑验收规模，否则缩小次数
FULL = os.environ.get("PARKVIEW_FULL") == "1"


def n_runs(full: int, reduced: int) -> int:
    return full if FULL else reduced


def make_tree(nodes: Mapping[str, Tuple[float, Sequence[str]]], root: str, leaf_order=None) -> OrderedMergeTree:
    return OrderedMergeTree(root, [Node(k, float(h), tuple(ch)) for k, (h, ch) in nodes.items()], leaf_order)


@pytest.fixture
def two_leaf() -> OrderedMergeTree:
    return read_tree((DATA / "two_leaf.json").read_bytes())


@pytest.fixture
def one_leaf() -> OrderedMergeTree:
    return read_tree((DATA / "one_leaf.json").read_bytes())


@pytest.fixture
def two_to_one(two_leaf, one_leaf) -> Interleaving:
    from parkview.interleaving import read_interleaving

    return read_interleaving((DATA / "two_to_one.interleaving.json").read_bytes(), two_leaf, one_leaf)


def identity_interleaving(t: OrderedMergeTree) -> Interleaving:
    images = {x: t.point(x) for x in t.leaves}
    return Interleaving(ShiftMap(0.0, t, t, images), ShiftMap(0.0, t, t, images))


def shift_interleaving(t: OrderedMergeTree, delta: float) -> Interleaving:
    """树与自身之间“整体上移 δ”的 interleaving。"""
    images = {x: ancestor_at_height(t, t.point(x), t.height(x) + delta) for x in t.leaves}
    return Interleaving(ShiftMap(delta, t, t, images), ShiftMap(delta, t, t, images))


# ---- 随机实例 ----
_STEP = 0.25  # 高度取 0.25 的倍数：加减 δ 精确，且会出现等高的情形


def _q(rng: np.random.Generator, lo: int, hi: int) -> float:
    return _STEP * int(rng.integers(lo, hi + 1))


def _merge_runs(
    rng: np.random.Generator,
    items: List[str],
    new_node,  # (children tuple) -> node id
    max_children: int = 3,
) -> str:
    """反复把相邻的 2..max_children 个子树合并成一个内部顶点，保持叶子顺序。"""
    while len(items) > 1:
        k = int(rng.integers(2, min(max_children, len(items)) + 1))
        i = int(rng.integers(0, len(items) - k + 1))
        nid = new_node(tuple(items[i : i + k]))
        items[i : i + k] = [nid]
    return items[0]


def random_tree(rng: np.random.Generator, n_leaves: int, max_children: int = 3, prefix: str = "") -> OrderedMergeTree:
    nodes: Dict[str, Node] = {}
    leaves = []
    for i in range(n_leaves):
        nid = f"{prefix}l{i}"
        nodes[nid] = Node(nid, _q(rng, 0, 8))
        leaves.append(nid)
    counter = iter(range(10**6))

    def new_node(kids: Tuple[str, ...]) -> str:
        nid = f"{prefix}v{next(counter)}"
        nodes[nid] = Node(nid, max(nodes[c].height for c in kids) + _q(rng, 1, 4), kids)
        return nid

    root = _merge_runs(rng, leaves, new_node, max_children)
    return OrderedMergeTree(root, nodes)


def tree_from_shape(rng: np.random.Generator, shape, prefix: str = "") -> OrderedMergeTree:
    """shape：None 表示叶子，tuple 表示有序孩子。"""
    nodes: Dict[str, Node] = {}
    counter = iter(range(10**6))

    def build(s) -> str:
        nid = f"{prefix}n{next(counter)}"
        if s is None:
            nodes[nid] = Node(nid, _q(rng, 0, 8))
            return nid
        kids = tuple(build(c) for c in s)
        nodes[nid] = Node(nid, max(nodes[c].height for c in kids) + _q(rng, 1, 4), kids)
        return nid

    root = build(shape)
    return OrderedMergeTree(root, nodes)


def shapes(n: int) -> Iterator[object]:
    """所有 n 片叶子、内部顶点至少两个孩子的有序树形。"""
    if n == 1:
        yield None
        return
    for comp in _compositions(n, 2):
        yield from _product([list(shapes(k)) for k in comp])


def _compositions(n: int, min_parts: int) -> Iterator[Tuple[int, ...]]:
    def rec(rest: int) -> Iterator[Tuple[int, ...]]:
        if rest == 0:
            yield ()
            return
        for first in range(1, rest + 1):
            for tail in rec(rest - first):
                yield (first,) + tail

    for c in rec(n):
        if len(c) >= min_parts:
            yield c


def _product(options: List[List[object]]) -> Iterator[object]:
    if not options:
        yield ()
        return
    for head in options[0]:
        for tail in _product(options[1:]):
            yield (head,) + tail  # type: ignore[operator]


def random_shift_map(
    rng: np.random.Generator,
    target: OrderedMergeTree,
    n_leaves: int,
    delta: float,
    monotone: bool = True,
    max_children: int = 3,
) -> ShiftMap:
    """在给定目标树上造一个合法的 δ-shift map（源树随机生成）。

    先在目标树上取点，源叶子高度 = 点高度 - δ；内部顶点高度不低于子树像的 LCA 高度 - δ，保证良定义。
    monotone=False 时像的顺序被打乱，只保留良定义与平移条件。
    """
    pts: List[TreePoint] = []
    for _ in range(n_leaves):
        x = target.leaves[int(rng.integers(0, len(target.leaves)))]
        h = target.height(x) + _q(rng, 0, 6)
        pts.append(ancestor_at_height(target, target.point(x), h))
    if monotone:
        pts.sort(key=lambda p: (target.key(p), p.height))
    else:
        rng.shuffle(pts)  # type: ignore[arg-type]

    nodes: Dict[str, Node] = {}
    images: Dict[str, TreePoint] = {}
    span_pts: Dict[str, TreePoint] = {}
    leaves = []
    for i, p in enumerate(pts):
        nid = f"s{i}"
        nodes[nid] = Node(nid, p.height - delta)
        images[nid] = p
        span_pts[nid] = p
        leaves.append(nid)
    counter = iter(range(10**6))

    def new_node(kids: Tuple[str, ...]) -> str:
        nid = f"u{next(counter)}"
        meet = span_pts[kids[0]]
        for c in kids[1:]:
            meet = lca(target, meet, span_pts[c])
        h = max(max(nodes[c].height for c in kids) + _q(rng, 1, 3), meet.height - delta + _q(rng, 0, 1))
        nodes[nid] = Node(nid, h, kids)
        span_pts[nid] = meet
        return nid

    root = _merge_runs(rng, leaves, new_node, max_children)
    src = OrderedMergeTree(root, nodes)
    return ShiftMap(delta, src, target, images)
