"""二维标量场 -> 合并树（join tree）：读入、升序扫描、持续度化简、按空间填充曲线排序叶子。"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from networkx.utils import UnionFind

from .errors import FieldError
from .mergetree import Node, OrderedMergeTree, smooth_degree_two

logger = logging.getLogger(__name__)

_N4 = ((-1, 0), (0, -1), (0, 1), (1, 0))
_N8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True, eq=False)
class ScalarField2D:
    values: np.ndarray  # (rows, cols)，行优先
    spacing: float = 1.0

    def __post_init__(self) -> None:
        a = np.asarray(self.values, dtype=float)
        if a.ndim != 2 or a.size == 0:
            raise FieldError(f"field must be a non-empty 2D grid, got shape {a.shape}")
        if not np.isfinite(a).all():
            bad = np.argwhere(~np.isfinite(a))[0]
            raise FieldError(f"non-finite value at row {bad[0]}, col {bad[1]}")
        object.__setattr__(self, "values", a)

    @classmethod
    def from_values(cls, rows: int, cols: int, values: List[float], spacing: float = 1.0) -> "ScalarField2D":
        if rows * cols != len(values):
            raise FieldError(f"rows*cols = {rows * cols} but {len(values)} values given")
        return cls(np.asarray(values, dtype=float).reshape(rows, cols), spacing)

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def cols(self) -> int:
        return int(self.values.shape[1])


def _frame_to_array(df: pd.DataFrame) -> np.ndarray:
    try:
        return df.apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise FieldError(f"non-numeric value in field: {e}") from e


def read_field(source: str | Path | bytes) -> ScalarField2D:
    """CSV（逗号分隔）或带 `rows cols` 表头的空白分隔网格。Path 读文件，str/bytes 视为文件内容。"""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    else:
        text = source

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FieldError("empty field file")

    if "," in lines[0]:
        df = pd.read_csv(io.StringIO("\n".join(lines)), header=None, skipinitialspace=True)
        return ScalarField2D(_frame_to_array(df))

    head = lines[0].split()
    if len(head) != 2 or not all(tok.isdigit() for tok in head):
        raise FieldError(f"whitespace grid needs a 'rows cols' header, got {lines[0]!r}")
    rows, cols = int(head[0]), int(head[1])
    if len(lines) - 1 != rows:
        raise FieldError(f"header says {rows} rows, found {len(lines) - 1}")
    df = pd.read_csv(io.StringIO("\n".join(lines[1:])), sep=r"\s+", header=None, engine="python")
    if df.shape != (rows, cols):
        raise FieldError(f"header says {rows}x{cols}, found {df.shape[0]}x{df.shape[1]}")
    return ScalarField2D(_frame_to_array(df))


# ---- 扫描构造 ----
def merge_tree_from_field(f: ScalarField2D, connectivity: int = 4) -> OrderedMergeTree:
    if connectivity not in (4, 8):
        raise FieldError(f"connectivity must be 4 or 8, got {connectivity}")
    nbrs = _N4 if connectivity == 4 else _N8
    rows, cols = f.rows, f.cols
    flat = f.values.ravel()
    n = flat.size
    # (值, 下标) 字典序：平台上的点也有确定的先后
    order = np.lexsort((np.arange(n), flat))

    uf = UnionFind()
    swept = np.zeros(n, dtype=bool)
    # 连通块代表元 -> 该块当前最高的树节点
    comp_node: Dict[int, str] = {}
    nodes: Dict[str, Node] = {}
    for idx in order.tolist():
        r, c = divmod(idx, cols)
        roots: List[int] = []
        for dr, dc in nbrs:
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols:
                j = rr * cols + cc
                if swept[j]:
                    rj = uf[j]
                    if rj not in roots:
                        roots.append(rj)
        swept[idx] = True
        h = float(flat[idx])
        if not roots:
            nid = f"m{r}_{c}"
            nodes[nid] = Node(nid, h, (), (r, c))
            comp_node[uf[idx]] = nid
        elif len(roots) == 1:
            uf.union(roots[0], idx)
            rep = uf[idx]
            if rep != roots[0]:
                comp_node[rep] = comp_node.pop(roots[0])
        else:
            nid = f"s{r}_{c}"
            nodes[nid] = Node(nid, h, tuple(comp_node.pop(rj) for rj in roots), (r, c))
            uf.union(idx, *roots)
            comp_node[uf[idx]] = nid

    if len(comp_node) != 1:
        raise FieldError(f"field is not connected: {len(comp_node)} components")
    root = next(iter(comp_node.values()))
    t = _contract_plateaus(nodes, root)
    logger.debug(
        "field %dx%d (%d-connectivity): %d leaves, %d vertices",
        rows,
        cols,
        connectivity,
        len(t.leaves),
        len(t.nodes),
    )
    return t


def _contract_plateaus(nodes: Dict[str, Node], root: str) -> OrderedMergeTree:
    """平台会产生与父亲等高的孩子：内部的并入父亲，叶子直接丢掉。"""
    t = OrderedMergeTree(root, nodes)
    kids: Dict[str, Tuple[str, ...]] = {}
    for v in reversed(t.preorder):
        h = t.height(v)
        out: List[str] = []
        for c in t.children(v):
            if t.height(c) == h:
                out.extend(kids[c])
            else:
                out.append(c)
        kids[v] = tuple(out)

    keep: List[Node] = []
    stack = [root]
    while stack:
        v = stack.pop()
        n = t.nodes[v]
        keep.append(Node(v, n.height, kids[v], n.cell))
        stack.extend(kids[v])
    contracted = OrderedMergeTree(root, keep)
    return smooth_degree_two(contracted)


# ---- 持续度 ----
def persistence(t: OrderedMergeTree) -> Dict[str, float]:
    """elder rule：在每个合并点，除最低（平局取最左）的分支外其余分支死亡。全局最低叶子为 inf。"""
    oldest: Dict[str, str] = {}
    out: Dict[str, float] = {}
    for v in reversed(t.preorder):
        kids = t.children(v)
        if not kids:
            oldest[v] = v
            continue
        cands = [oldest[c] for c in kids]
        elder = min(cands, key=lambda x: (t.height(x), t.leaf_rank[x]))
        for x in cands:
            if x != elder:
                out[x] = t.height(v) - t.height(x)
        oldest[v] = elder
    out[oldest[t.root]] = math.inf
    return out


def simplify(t: OrderedMergeTree, threshold: float) -> OrderedMergeTree:
    """删掉持续度 < threshold 的叶子。

    elder rule 下删一片叶子不改变其余叶子的持续度，所以逐个删除与一次筛选结果相同。
    """
    pers = persistence(t)
    survivors = {x for x, p in pers.items() if p >= threshold}
    if len(survivors) == len(t.leaves):
        return t

    keep_sub: Dict[str, bool] = {}
    for v in reversed(t.preorder):
        kids = t.children(v)
        keep_sub[v] = v in survivors if not kids else any(keep_sub[c] for c in kids)

    out: List[Node] = []
    for v in t.preorder:
        if not keep_sub[v]:
            continue
        n = t.nodes[v]
        out.append(Node(v, n.height, tuple(c for c in n.children if keep_sub[c]), n.cell))
    pruned = OrderedMergeTree(t.root, out)
    result = smooth_degree_two(pruned)
    logger.debug("simplify(%g): %d -> %d leaves", threshold, len(t.leaves), len(result.leaves))
    return result


# ---- 空间填充曲线 ----
def hilbert_index(n: int, row: int, col: int) -> int:
    """n×n（n 为 2 的幂）网格上 (row, col) 的 Hilbert 序号；x = col, y = row。"""
    x, y = col, row
    d = 0
    s = n // 2
    while s > 0:
        rx = 1 if x & s else 0
        ry = 1 if y & s else 0
        d += s * s * ((3 * rx) ^ ry)
        if ry == 0:
            if rx == 1:
                x = n - 1 - x
                y = n - 1 - y
            x, y = y, x
        s //= 2
    return d


def morton_index(row: int, col: int) -> int:
    d = 0
    b = 0
    while (row >> b) or (col >> b):
        d |= ((col >> b) & 1) << (2 * b)
        d |= ((row >> b) & 1) << (2 * b + 1)
        b += 1
    return d


def _side(rows: int, cols: int) -> int:
    n = 1
    while n < max(rows, cols):
        n *= 2
    return n


def order_leaves(
    t: OrderedMergeTree,
    field: Optional[ScalarField2D] = None,
    curve: str = "hilbert",
) -> OrderedMergeTree:
    missing = [x for x in t.leaves if t.nodes[x].cell is None]
    if missing:
        raise FieldError(f"leaves without grid position: {', '.join(missing[:5])}")
    if field is not None:
        rows, cols = field.rows, field.cols
    else:
        rows = 1 + max(t.nodes[x].cell[0] for x in t.leaves)  # type: ignore[index]
        cols = 1 + max(t.nodes[x].cell[1] for x in t.leaves)  # type: ignore[index]
    n = _side(rows, cols)

    if curve == "hilbert":
        index = lambda r, c: hilbert_index(n, r, c)  # noqa: E731
    elif curve == "morton":
        index = lambda r, c: morton_index(r, c)  # noqa: E731
    else:
        raise FieldError(f"unknown curve {curve!r}")

    key: Dict[str, int] = {}
    kids: Dict[str, Tuple[str, ...]] = {}
    for v in reversed(t.preorder):
        ch = t.children(v)
        if not ch:
            r, c = t.nodes[v].cell  # type: ignore[misc]
            key[v] = index(r, c)
            kids[v] = ()
        else:
            kids[v] = tuple(sorted(ch, key=lambda x: key[x]))
            key[v] = key[kids[v][0]]
    return OrderedMergeTree(t.root, [Node(v, t.height(v), kids[v], t.nodes[v].cell) for v in t.preorder])
