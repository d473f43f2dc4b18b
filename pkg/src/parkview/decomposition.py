"""路径分解与重路径-分支分解。

heavy_decomposition 自底向上：每个内部顶点选权重最大的下边作为 through edge，
平局时选活动路径起点最低者，再平局选最左的孩子。
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple

from .errors import (
    DecompositionSizeError,
    InterleavingValidationError,
    InternalInvariantError,
    PreconditionError,
)
from .interleaving import Branch, Interleaving, ShiftMap, path_branches
from .mergetree import OrderedMergeTree

logger = logging.getLogger(__name__)

MAX_ENUM_INTERNAL = 12
MAX_ENUM_PRODUCT = 500_000


@dataclass(frozen=True)
class Path:
    index: int
    leaf: str
    vertices: Tuple[str, ...]  # 自下而上
    top: Optional[str]  # None 表示根路径（向上延伸到 +inf）


@dataclass(frozen=True, eq=False)
class PathDecomposition:
    tree: OrderedMergeTree
    through: Mapping[str, str]

    def __post_init__(self) -> None:
        t = self.tree
        internal = set(t.internal)
        if set(self.through) != internal:
            raise PreconditionError("through edges must be given for exactly the internal vertices")
        for v, c in self.through.items():
            if c not in t.children(v):
                raise PreconditionError(f"through edge {c!r} is not a down edge of {v!r}")

    @cached_property
    def paths(self) -> Tuple[Path, ...]:
        t = self.tree
        out: List[Path] = []
        for i, leaf in enumerate(t.leaves):
            v = leaf
            verts = [v]
            p = t.parent[v]
            while p is not None and self.through[p] == v:
                v = p
                verts.append(v)
                p = t.parent[v]
            out.append(Path(i, leaf, tuple(verts), p))
        return tuple(out)

    @cached_property
    def path_of(self) -> Dict[str, int]:
        return {v: p.index for p in self.paths for v in p.vertices}

    def path_top_height(self, index: int) -> float:
        top = self.paths[index].top
        return math.inf if top is None else self.tree.height(top)

    def top_edge(self, index: int) -> str:
        """路径最上面那条边（以下端点命名）。"""
        return self.paths[index].vertices[-1]


@dataclass(frozen=True)
class PathBranchDecomposition:
    alpha_paths: PathDecomposition  # T′ 的分解，α 的分支
    alpha_branches: Tuple[Branch, ...]
    beta_paths: PathDecomposition  # T 的分解，β 的分支
    beta_branches: Tuple[Branch, ...]


def heavy_decomposition(m: ShiftMap) -> Tuple[PathDecomposition, List[Branch]]:
    if m.violations:
        raise InterleavingValidationError("invalid shift map", m.violations)
    t = m.target
    table = m.edge_table
    weight, low_edge = table.weight, table.low

    through: Dict[str, str] = {}
    low_path: Dict[str, Optional[float]] = {}
    for v in reversed(t.preorder):
        kids = t.children(v)
        if kids:

            def rank(item: Tuple[int, str]) -> Tuple[int, float, int]:
                idx, c = item
                lp = low_path[c]
                return (-weight[c], math.inf if lp is None else lp, idx)

            _, best = min(enumerate(kids), key=rank)
            through[v] = best
            lp = low_path[best]
            low_path[v] = lp if lp is not None else low_edge.get(v)
        else:
            low_path[v] = low_edge.get(v)

    d = PathDecomposition(t, through)
    branches = path_branches(m, d)
    for b in branches:
        e = d.top_edge(b.path)
        if b.size != weight[e]:
            raise InternalInvariantError(
                f"branch of path {b.path} has {b.size} components but its top edge {e} has weight {weight[e]}"
            )
    logger.debug(
        "heavy decomposition: %d paths, %d branch components",
        len(d.paths),
        sum(b.size for b in branches),
    )
    return d, branches


def enumerate_all_decompositions(t: OrderedMergeTree) -> Iterator[PathDecomposition]:
    internal = t.internal
    if len(internal) > MAX_ENUM_INTERNAL:
        raise DecompositionSizeError(
            f"{len(internal)} internal vertices exceeds the enumeration limit of {MAX_ENUM_INTERNAL}"
        )
    total = math.prod(len(t.children(v)) for v in internal)
    if total > MAX_ENUM_PRODUCT:
        raise DecompositionSizeError(f"{total} decompositions exceeds the enumeration limit")
    for combo in itertools.product(*(t.children(v) for v in internal)):
        yield PathDecomposition(t, dict(zip(internal, combo)))


def decomposition_cost(m: ShiftMap, d: PathDecomposition) -> Tuple[int, int]:
    """(分支分量总数, 单条路径最大分量数)；同时用顶点代价公式交叉核对。"""
    branches = path_branches(m, d)
    sizes = [b.size for b in branches]
    total = sum(sizes)

    weight = m.edge_table.weight
    by_vertex = weight[d.tree.root] + sum(
        weight[c] for v in d.tree.internal for c in d.tree.children(v) if c != d.through[v]
    )
    if by_vertex != total:
        raise InternalInvariantError(f"branch total {total} != vertex-cost total {by_vertex}")
    return total, max(sizes, default=0)


def path_branch_decomposition(i: Interleaving) -> PathBranchDecomposition:
    ad, ab = heavy_decomposition(i.alpha)
    bd, bb = heavy_decomposition(i.beta)
    return PathBranchDecomposition(ad, tuple(ab), bd, tuple(bb))


def _num(x: Optional[float]) -> Optional[float]:
    if x is None or not math.isfinite(x):
        return None
    return x


def decomposition_dump(m: ShiftMap, d: PathDecomposition) -> Dict[str, Any]:
    """调试输出：每个内部顶点的 through edge 与全部候选权重，每条路径的分支大小与活动区间。"""
    weight = m.edge_table.weight
    t = d.tree
    vertices = {
        v: {
            "through": d.through[v],
            "candidates": {c: weight[c] for c in t.children(v)},
        }
        for v in t.internal
    }
    branches = path_branches(m, d)
    paths = []
    for p, b in zip(d.paths, branches):
        act = b.active_interval
        paths.append(
            {
                "index": p.index,
                "leaf": p.leaf,
                "vertices": list(p.vertices),
                "top": p.top,
                "branch_size": b.size,
                "active": None if act is None else [_num(act[0]), _num(act[1])],
            }
        )
    return {"delta": m.delta, "vertices": vertices, "paths": paths}
