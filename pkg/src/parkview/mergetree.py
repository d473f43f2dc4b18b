"""有序合并树：数据模型、树上的点运算、JSON 读写。

树在构造后不可变；所有派生表（父节点、先序、叶序、子树叶区间）在构造时一次算好。
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import PreconditionError, TreeParseError, TreeValidationError, Violation

logger = logging.getLogger(__name__)

# 派生几何（吸附、区间比较）使用的容差；校验器里一律精确比较
SNAP_TOL = 1e-9


@dataclass(frozen=True)
class Node:
    id: str
    height: float
    children: Tuple[str, ...] = ()
    cell: Optional[Tuple[int, int]] = None  # 来自标量场时记录网格位置 (row, col)


@dataclass(frozen=True)
class TreePoint:
    """树上的点：所在边（以下端点命名）+ 高度。顶点 v 就是 (v, f(v))。"""

    edge: str
    height: float

    def as_dict(self) -> Dict[str, Any]:
        return {"edge": self.edge, "height": self.height}


class OrderedMergeTree:
    def __init__(
        self,
        root: str,
        nodes: Mapping[str, Node] | Iterable[Node],
        leaf_order: Optional[Sequence[str]] = None,
    ):
        if isinstance(nodes, Mapping):
            node_map = dict(nodes)
        else:
            node_map = {}
            for n in nodes:
                if n.id in node_map:
                    raise TreeParseError(f"duplicate node id: {n.id}")
                node_map[n.id] = n

        if root not in node_map:
            raise TreeParseError(f"root {root!r} is not a node")

        parent: Dict[str, Optional[str]] = {root: None}
        for nid, n in node_map.items():
            for c in n.children:
                if c not in node_map:
                    raise TreeParseError(f"node {nid!r} lists unknown child {c!r}")
                if c == root:
                    raise TreeParseError(f"root {root!r} appears as a child of {nid!r}")
                if c in parent:
                    raise TreeParseError(f"node {c!r} has more than one parent")
                parent[c] = nid

        # 迭代先序遍历（不用递归，深树也安全）
        preorder: List[str] = []
        stack = [root]
        seen = set()
        while stack:
            v = stack.pop()
            if v in seen:
                raise TreeParseError(f"cycle through node {v!r}")
            seen.add(v)
            preorder.append(v)
            stack.extend(reversed(node_map[v].children))
        if len(seen) != len(node_map):
            missing = sorted(set(node_map) - seen)
            raise TreeParseError(f"nodes unreachable from root: {', '.join(missing[:5])}")

        self.root = root
        self.nodes: Dict[str, Node] = node_map
        self.parent = parent
        self.preorder: Tuple[str, ...] = tuple(preorder)
        self.pre_index = {v: i for i, v in enumerate(preorder)}

        self.leaves: Tuple[str, ...] = tuple(v for v in preorder if not node_map[v].children)
        self.leaf_rank = {v: i for i, v in enumerate(self.leaves)}
        self.explicit_leaf_order: Optional[Tuple[str, ...]] = (
            tuple(leaf_order) if leaf_order is not None else None
        )

        size: Dict[str, int] = {}
        span: Dict[str, Tuple[int, int]] = {}
        for v in reversed(preorder):
            kids = node_map[v].children
            if not kids:
                size[v] = 1
                r = self.leaf_rank[v]
                span[v] = (r, r)
            else:
                size[v] = 1 + sum(size[c] for c in kids)
                span[v] = (span[kids[0]][0], span[kids[-1]][1])
        self.size = size
        self.span = span

        depth: Dict[str, int] = {}
        for v in preorder:
            p = parent[v]
            depth[v] = 0 if p is None else depth[p] + 1
        self.depth = depth

    def __repr__(self) -> str:
        return f"OrderedMergeTree(root={self.root!r}, nodes={len(self.nodes)}, leaves={len(self.leaves)})"

    # ---- 基本查询 ----
    def height(self, v: str) -> float:
        return self.nodes[v].height

    def children(self, v: str) -> Tuple[str, ...]:
        return self.nodes[v].children

    def is_leaf(self, v: str) -> bool:
        return not self.nodes[v].children

    @property
    def internal(self) -> Tuple[str, ...]:
        return tuple(v for v in self.preorder if self.nodes[v].children)

    @property
    def leaf_order(self) -> Tuple[str, ...]:
        return self.explicit_leaf_order if self.explicit_leaf_order is not None else self.leaves

    def upper(self, v: str) -> float:
        """边 v 的上端高度；根边为 +inf。"""
        p = self.parent[v]
        return math.inf if p is None else self.nodes[p].height

    def point(self, v: str) -> TreePoint:
        return TreePoint(v, self.nodes[v].height)

    def contains(self, p: TreePoint) -> bool:
        if p.edge not in self.nodes:
            return False
        return self.height(p.edge) <= p.height < self.upper(p.edge)

    def is_ancestor(self, u: str, v: str) -> bool:
        """u 是否为 v 的祖先（含 u == v）。"""
        i = self.pre_index[u]
        return i <= self.pre_index[v] < i + self.size[u]

    def key(self, p: TreePoint) -> int:
        """同一高度上 ≤_h 的排序键：所在边子树的最左叶序号。"""
        return self.span[p.edge][0]


def ancestor_at_height(t: OrderedMergeTree, p: TreePoint, h: float) -> TreePoint:
    if h < p.height:
        raise PreconditionError(f"height {h} is below point {p.edge}@{p.height}")
    v = p.edge
    parent = t.parent
    nodes = t.nodes
    pv = parent[v]
    while pv is not None and nodes[pv].height <= h:
        v = pv
        pv = parent[v]
    return TreePoint(v, h)


def vertex_lca(t: OrderedMergeTree, u: str, v: str) -> str:
    du, dv = t.depth[u], t.depth[v]
    while du > dv:
        u = t.parent[u]  # type: ignore[assignment]
        du -= 1
    while dv > du:
        v = t.parent[v]  # type: ignore[assignment]
        dv -= 1
    while u != v:
        u = t.parent[u]  # type: ignore[assignment]
        v = t.parent[v]  # type: ignore[assignment]
    return u


def lca(t: OrderedMergeTree, u: TreePoint, v: TreePoint) -> TreePoint:
    h = max(u.height, v.height)
    a = ancestor_at_height(t, u, h)
    b = ancestor_at_height(t, v, h)
    if a.edge == b.edge:
        return a
    # 两点在同一高度但不在同一边上，LCA 必是严格更高的顶点
    return t.point(vertex_lca(t, a.edge, b.edge))


def order_at_height(t: OrderedMergeTree, h: float) -> List[TreePoint]:
    edges = [v for v in t.preorder if t.height(v) <= h < t.upper(v)]
    edges.sort(key=lambda v: t.span[v][0])
    return [TreePoint(v, h) for v in edges]


def descendant_leaves(t: OrderedMergeTree, v: str) -> Tuple[str, ...]:
    a, b = t.span[v]
    return t.leaves[a : b + 1]


# ---- 校验 ----
def validate_tree(t: OrderedMergeTree) -> List[Violation]:
    out: List[Violation] = []

    for v in t.preorder:
        h = t.height(v)
        if not math.isfinite(h):
            out.append(Violation("finite", v, f"height {h} is not finite"))

    for v in t.preorder:
        p = t.parent[v]
        if p is None:
            continue
        if not t.height(p) > t.height(v):
            out.append(
                Violation(
                    "strict",
                    f"{v}-{p}",
                    f"height must increase toward the root: f({v})={t.height(v)} f({p})={t.height(p)}",
                )
            )

    for v in t.internal:
        if len(t.children(v)) == 1:
            out.append(Violation("degree", v, "internal vertex with a single child"))

    order = t.explicit_leaf_order
    if order is None:
        return out

    if len(order) != len(set(order)) or set(order) != set(t.leaves):
        extra = sorted(set(order) - set(t.leaves))
        missing = sorted(set(t.leaves) - set(order))
        out.append(
            Violation(
                "leaf-order",
                "leaf_order",
                f"not a permutation of the leaves (unknown={extra[:5]}, missing={missing[:5]})",
            )
        )
        return out

    rank = {x: i for i, x in enumerate(order)}
    lo: Dict[str, int] = {}
    hi: Dict[str, int] = {}
    bad: Dict[str, bool] = {}
    bad_below: Dict[str, bool] = {}
    for v in reversed(t.preorder):
        kids = t.children(v)
        if not kids:
            lo[v] = hi[v] = rank[v]
            bad[v] = bad_below[v] = False
            continue
        lo[v] = min(lo[c] for c in kids)
        hi[v] = max(hi[c] for c in kids)
        # 子树叶子在 leaf_order 中必须连续
        bad[v] = hi[v] - lo[v] + 1 != t.span[v][1] - t.span[v][0] + 1
        bad_below[v] = any(bad[c] or bad_below[c] for c in kids)

    has_order_violation = False
    for v in t.preorder:
        if bad[v] and not bad_below[v]:
            has_order_violation = True
            inside = set(descendant_leaves(t, v))
            x1, x3 = order[lo[v]], order[hi[v]]
            x2 = next(order[r] for r in range(lo[v] + 1, hi[v]) if order[r] not in inside)
            w = vertex_lca(t, x1, x3)
            out.append(
                Violation(
                    "order",
                    f"({x1}, {x2}, {x3})",
                    f"{x2} lies between {x1} and {x3} but outside the subtree of lca={w}",
                )
            )

    if not has_order_violation and tuple(order) != t.leaves:
        for v in t.internal:
            starts = [lo[c] for c in t.children(v)]
            if starts != sorted(starts):
                out.append(
                    Violation(
                        "child-order",
                        v,
                        "children order disagrees with leaf_order",
                    )
                )
                break
    return out


# ---- JSON ----
def tree_from_dict(data: Any) -> OrderedMergeTree:
    if not isinstance(data, dict):
        raise TreeParseError("tree JSON must be an object")
    if "root" not in data:
        raise TreeParseError("missing field: root")
    if "nodes" not in data or not isinstance(data["nodes"], dict):
        raise TreeParseError("missing or malformed field: nodes")

    nodes: List[Node] = []
    for nid, raw in data["nodes"].items():
        if not isinstance(raw, dict) or "height" not in raw:
            raise TreeParseError(f"node {nid!r}: missing height")
        h = raw["height"]
        if isinstance(h, bool) or not isinstance(h, (int, float)):
            raise TreeParseError(f"node {nid!r}: height must be a number")
        kids = raw.get("children") or []
        if not isinstance(kids, list) or not all(isinstance(c, str) for c in kids):
            raise TreeParseError(f"node {nid!r}: children must be a list of ids")
        cell = raw.get("cell")
        if cell is not None:
            if not (isinstance(cell, list) and len(cell) == 2 and all(isinstance(x, int) for x in cell)):
                raise TreeParseError(f"node {nid!r}: cell must be [row, col]")
            cell = (int(cell[0]), int(cell[1]))
        nodes.append(Node(str(nid), float(h), tuple(kids), cell))

    leaf_order = data.get("leaf_order")
    if leaf_order is not None and (
        not isinstance(leaf_order, list) or not all(isinstance(x, str) for x in leaf_order)
    ):
        raise TreeParseError("leaf_order must be a list of ids")
    return OrderedMergeTree(str(data["root"]), nodes, leaf_order)


def read_tree(data: bytes | str, validate: bool = True) -> OrderedMergeTree:
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise TreeParseError(f"invalid JSON: {e}") from e
    t = tree_from_dict(raw)
    if validate:
        violations = validate_tree(t)
        if violations:
            raise TreeValidationError("invalid merge tree", violations)
    return t


def tree_to_dict(t: OrderedMergeTree) -> Dict[str, Any]:
    nodes: Dict[str, Any] = {}
    for v in t.preorder:
        n = t.nodes[v]
        d: Dict[str, Any] = {"height": n.height, "children": list(n.children)}
        if n.cell is not None:
            d["cell"] = [n.cell[0], n.cell[1]]
        nodes[v] = d
    out: Dict[str, Any] = {"root": t.root, "nodes": nodes}
    if t.explicit_leaf_order is not None and t.explicit_leaf_order != t.leaves:
        out["leaf_order"] = list(t.explicit_leaf_order)
    return out


def write_tree(t: OrderedMergeTree) -> bytes:
    return (json.dumps(tree_to_dict(t), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def smooth_degree_two(t: OrderedMergeTree) -> OrderedMergeTree:
    """去掉只有一个孩子的内部顶点（把它的孩子直接接到它的父亲上）。"""

    def resolve(v: str) -> str:
        while len(t.children(v)) == 1:
            v = t.children(v)[0]
        return v

    new_root = resolve(t.root)
    out: List[Node] = []
    stack = [new_root]
    while stack:
        v = stack.pop()
        n = t.nodes[v]
        kids = tuple(resolve(c) for c in n.children)
        out.append(Node(v, n.height, kids, n.cell))
        stack.extend(kids)
    removed = len(t.nodes) - len(out)
    if removed:
        logger.debug("smoothed %d degree-two vertices", removed)
    return OrderedMergeTree(new_root, out)
