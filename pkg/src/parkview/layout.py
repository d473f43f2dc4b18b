"""把两棵树的重路径-分支分解变成确定的几何：列、树线、树篱（hedge）、活动路径、网格。

单位：横向为“列宽单位”，纵向直接使用树的高度；像素换算在 render 里完成。
"""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .config import LayoutConfig
from .decomposition import PathBranchDecomposition, PathDecomposition
from .errors import ColoringError, ConfigError, InternalInvariantError, Violation
from .interleaving import Branch, Interleaving
from .mergetree import SNAP_TOL, OrderedMergeTree

logger = logging.getLogger(__name__)

TREE, FILLER, BRIDGE = "tree", "filler", "bridge"


@dataclass(frozen=True)
class Column:
    path: int
    index: int
    x: float  # 列中心
    width: float
    active: bool
    leaf: str
    bottom: float  # 叶子高度
    top: float  # 路径顶端高度（根路径截到场景上沿）


@dataclass(frozen=True)
class Bar:
    column: int
    kind: str
    bottom: float
    top: float

    @property
    def length(self) -> float:
        return self.top - self.bottom


@dataclass(frozen=True)
class Bridge:
    """相邻两个分支连通块之间的桥：从左块最后一列连到右块第一列。

    两列不相邻时，中间每列各有一根 BRIDGE 柱；相邻时桥落在两根树柱的公共边上。
    """

    left: int
    right: int
    bottom: float
    top: float


@dataclass(frozen=True)
class Hedge:
    path: int  # 对应另一棵树里的路径编号
    bars: Tuple[Bar, ...]
    top: float
    color: int = -1
    components: int = 1
    bridges: Tuple[Bridge, ...] = ()

    @property
    def first_column(self) -> int:
        return self.bars[0].column

    @property
    def last_column(self) -> int:
        return self.bars[-1].column

    def bar_at(self, column: int) -> Optional[Bar]:
        for b in self.bars:
            if b.column == column:
                return b
        return None

    @property
    def lowest_tree_column(self) -> int:
        tree_bars = [b for b in self.bars if b.kind == TREE]
        return min(tree_bars, key=lambda b: (b.bottom, b.column)).column


@dataclass(frozen=True)
class Connector:
    vertex: str
    height: float
    first: int
    last: int


@dataclass(frozen=True)
class ActivePathGlyph:
    path: int
    column: int
    lo: float
    hi: float
    color: int


@dataclass(frozen=True)
class TreeLayout:
    tree: OrderedMergeTree
    columns: Tuple[Column, ...]
    connectors: Tuple[Connector, ...]
    hedges: Tuple[Hedge, ...]
    glyphs: Tuple[ActivePathGlyph, ...]

    @property
    def total_width(self) -> float:
        return sum(c.width for c in self.columns)


@dataclass(frozen=True)
class HedgeAdjacency:
    graph: nx.Graph
    parent: Dict[int, int]


@dataclass(frozen=True)
class Scene:
    left: TreeLayout
    right: TreeLayout
    grid: Tuple[float, ...]
    delta: float
    ceiling: float
    floor: float
    palette_size: int
    grid_spacing: float


# ---- 列 ----
def build_columns(
    d: PathDecomposition,
    branches_targeting: Sequence[Branch],
    widths: LayoutConfig,
    ceiling: Optional[float] = None,
) -> List[Column]:
    active = {b.path for b in branches_targeting if not b.is_empty}
    out: List[Column] = []
    x = 0.0
    for p in d.paths:
        is_active = p.index in active
        w = widths.active_width if is_active else widths.column_inactive_width
        top = d.path_top_height(p.index)
        if not math.isfinite(top) and ceiling is not None:
            top = ceiling
        out.append(Column(p.index, p.index, x + w / 2, w, is_active, p.leaf, d.tree.height(p.leaf), top))
        x += w
    return out


def build_connectors(d: PathDecomposition) -> List[Connector]:
    t = d.tree
    out = []
    for v in t.internal:
        cols = [d.path_of[c] for c in t.children(v)]
        out.append(Connector(v, t.height(v), min(cols), max(cols)))
    return out


# ---- 树篱 ----
def build_hedge(
    b: Branch,
    columns: Sequence[Column],
    source_paths: PathDecomposition,
    top: Optional[float] = None,
    bridge_fraction: float = 0.5,
) -> Optional[Hedge]:
    if b.is_empty:
        return None
    top = b.top_height if top is None else top

    comps: List[Dict[int, float]] = []
    for comp in b.components:
        iv = comp.column_intervals(source_paths)
        comps.append({k: lo for k, (lo, _hi) in iv.items()})
    comps.sort(key=min)

    bars: Dict[int, Bar] = {}

    def put(bar: Bar) -> None:
        if bar.column in bars:
            raise InternalInvariantError(f"hedge of path {b.path}: two bars in column {bar.column}")
        if not 0 <= bar.column < len(columns):
            raise InternalInvariantError(f"hedge of path {b.path}: column {bar.column} out of range")
        bars[bar.column] = bar

    for cc in comps:
        ks = sorted(cc)
        for k in ks:
            put(Bar(k, TREE, cc[k], top))
        for a, z in zip(ks, ks[1:]):
            fb = max(cc[a], cc[z])
            for k in range(a + 1, z):
                put(Bar(k, FILLER, fb, top))

    shortest = min(top - bar.bottom for bar in bars.values())
    bridge_bottom = top - bridge_fraction * shortest
    bridges: List[Bridge] = []
    for prev, nxt in zip(comps, comps[1:]):
        if max(prev) >= min(nxt):
            raise InternalInvariantError(f"hedge of path {b.path}: components interleave in columns")
        for k in range(max(prev) + 1, min(nxt)):
            put(Bar(k, BRIDGE, bridge_bottom, top))
        bridges.append(Bridge(max(prev), min(nxt), bridge_bottom, top))

    cols = sorted(bars)
    if cols != list(range(cols[0], cols[-1] + 1)):
        raise InternalInvariantError(f"hedge of path {b.path} is not a contiguous histogram: {cols}")
    return Hedge(b.path, tuple(bars[k] for k in cols), top, components=b.size, bridges=tuple(bridges))


def _contacts(hedges: Sequence[Hedge], tol: float) -> Tuple[nx.Graph, Dict[int, Set[int]], List[Violation]]:
    g = nx.Graph()
    g.add_nodes_from(range(len(hedges)))
    parents: Dict[int, Set[int]] = defaultdict(set)
    under: List[Tuple[int, int, int]] = []  # (上方 hedge, 列, 贴在其 bar 底部的 hedge)
    out: List[Violation] = []

    by_col: Dict[int, List[Tuple[int, Bar]]] = defaultdict(list)
    for i, h in enumerate(hedges):
        for bar in h.bars:
            by_col[bar.column].append((i, bar))

    for col, items in sorted(by_col.items()):
        for x in range(len(items)):
            ia, a = items[x]
            for y in range(x + 1, len(items)):
                ib, b = items[y]
                overlap = min(a.top, b.top) - max(a.bottom, b.bottom)
                if overlap > tol:
                    out.append(
                        Violation("disjoint", f"{ia},{ib}", f"hedges overlap by {overlap:.3g} in column {col}")
                    )
                elif abs(a.top - b.bottom) <= tol:
                    g.add_edge(ia, ib, kind="vertical")
                    parents[ia].add(ib)
                    under.append((ib, col, ia))
                elif abs(b.top - a.bottom) <= tol:
                    g.add_edge(ia, ib, kind="vertical")
                    parents[ib].add(ia)
                    under.append((ia, col, ib))

        for ia, a in items:
            for ib, b in by_col.get(col + 1, ()):
                if ia != ib and min(a.top, b.top) - max(a.bottom, b.bottom) > tol:
                    g.add_edge(ia, ib, kind="side")

    for i, ps in parents.items():
        if len(ps) > 1:
            out.append(Violation("one-parent", str(i), f"hedge has {len(ps)} parents: {sorted(ps)}"))

    for upper, col, lower in under:
        h = hedges[upper]
        longest = max(bar.length for bar in h.bars)
        bar = h.bar_at(col)
        if bar is not None and bar.length >= longest - tol:
            out.append(
                Violation("longest-bar", str(upper), f"hedge {lower} touches the bottom of its longest bar (column {col})")
            )
    return g, parents, out


def hedge_property_violations(hedges: Sequence[Hedge], tol: float = SNAP_TOL) -> List[Violation]:
    return _contacts(hedges, tol)[2]


def hedge_adjacency(hedges: Sequence[Hedge], tol: float = SNAP_TOL) -> HedgeAdjacency:
    g, parents, violations = _contacts(hedges, tol)
    if violations:
        raise InternalInvariantError(f"hedge property violated: {violations[0]}")
    return HedgeAdjacency(g, {i: next(iter(ps)) for i, ps in parents.items()})


# ---- 着色 ----
def color_hedges(
    hedges: Sequence[Hedge],
    adjacency: HedgeAdjacency,
    palette_size: int,
    tol: float = SNAP_TOL,
) -> List[int]:
    """按顶端高度从高到低依次着色；三色不够时在父 hedge 的口袋里交换左右邻居的颜色。"""
    if palette_size < 3:
        raise ConfigError(f"palette_size must be >= 3, got {palette_size}")
    g = adjacency.graph
    n = len(hedges)
    color = [-1] * n
    order = sorted(range(n), key=lambda i: (-hedges[i].top, hedges[i].first_column))

    for gi in order:
        used = {color[j] for j in g.neighbors(gi) if color[j] >= 0}
        free = [c for c in range(palette_size) if c not in used]
        if not free:
            _swap_pocket(hedges, adjacency, color, gi, tol)
            used = {color[j] for j in g.neighbors(gi) if color[j] >= 0}
            free = [c for c in range(palette_size) if c not in used]
            if not free:
                raise ColoringError(f"no free color for hedge {gi} after swap")
        color[gi] = free[0]

    for a, b in g.edges:
        if color[a] == color[b]:
            raise ColoringError(f"adjacent hedges {a} and {b} share color {color[a]}")
    return color


def _swap_pocket(
    hedges: Sequence[Hedge],
    adjacency: HedgeAdjacency,
    color: List[int],
    gi: int,
    tol: float,
) -> None:
    G = hedges[gi]
    colored = [j for j in adjacency.graph.neighbors(gi) if color[j] >= 0]
    pi = adjacency.parent.get(gi)
    li = next((j for j in colored if hedges[j].last_column < G.first_column), None)
    ri = next((j for j in colored if hedges[j].first_column > G.last_column), None)
    if pi is None or li is None or ri is None or color[pi] < 0:
        raise ColoringError(f"hedge {gi}: neighbours are not parent/left/right as expected")
    if len({color[pi], color[li], color[ri]}) != 3:
        raise ColoringError(f"hedge {gi}: expected three distinct neighbour colors")

    P = hedges[pi]
    left = [bar for bar in P.bars if bar.column < G.first_column and bar.bottom < G.top - tol]
    right = [bar for bar in P.bars if bar.column > G.last_column and bar.bottom < G.top - tol]
    if left:
        lo, hi = max(bar.column for bar in left), G.first_column
    elif right:
        lo, hi = G.last_column, min(bar.column for bar in right)
    else:
        raise ColoringError(f"parent of hedge {gi} does not extend below its top")

    l, r = color[li], color[ri]
    pocket = [
        j
        for j in range(len(hedges))
        if j not in (gi, pi)
        and color[j] >= 0
        and hedges[j].first_column > lo
        and hedges[j].last_column < hi
        and hedges[j].top <= P.top + tol
    ]
    for j in pocket:
        if color[j] == l:
            color[j] = r
        elif color[j] == r:
            color[j] = l
    logger.debug("hedge %d: swapped colors %d/%d on %d hedges between columns %d and %d", gi, l, r, len(pocket), lo, hi)


# ---- 场景 ----
def layout_violations(layout: TreeLayout) -> List[Violation]:
    """任何叶子都不能画在水平连接线的正上方。"""
    out: List[Violation] = []
    for con in layout.connectors:
        for k in range(con.first, con.last + 1):
            col = layout.columns[k]
            if col.bottom > con.height:
                out.append(
                    Violation("leaf-above-connector", col.leaf, f"leaf lies above the connector of {con.vertex}")
                )
    return out


def grid_heights(floor: float, ceiling: float, spacing: float, max_lines: int) -> List[float]:
    if spacing <= 0:
        return []
    kmin = math.ceil(floor / spacing)
    kmax = math.floor(ceiling / spacing)
    count = kmax - kmin + 1
    if count <= 0:
        return []
    step = max(1, math.ceil(count / max_lines))
    if step > 1:
        logger.warning("grid thinned: %d lines at spacing %g, drawing every %d-th", count, spacing, step)
    kstart = math.ceil(kmin / step) * step
    return [k * spacing for k in range(kstart, kmax + 1, step)]


def _hedges_in(
    branches: Sequence[Branch],
    columns: Sequence[Column],
    source_paths: PathDecomposition,
    ceiling: float,
    delta: float,
    cfg: LayoutConfig,
) -> List[Hedge]:
    out = []
    for b in branches:
        top = None if math.isfinite(b.top_height) else ceiling - delta
        h = build_hedge(b, columns, source_paths, top=top, bridge_fraction=cfg.bridge_fraction)
        if h is not None:
            out.append(h)
    return out


def _glyphs(hedges: Sequence[Hedge], colors: Sequence[int], branches: Sequence[Branch], ceiling: float) -> List[ActivePathGlyph]:
    by_path = {b.path: b for b in branches}
    out = []
    for h, c in zip(hedges, colors):
        b = by_path[h.path]
        hi = b.path_top if math.isfinite(b.path_top) else ceiling
        out.append(ActivePathGlyph(b.path, b.path, b.bottom_height + b.delta, hi, c))  # type: ignore[operator]
    out.sort(key=lambda gl: gl.column)
    return out


def _check_correspondence(hedges: Sequence[Hedge], glyphs: Sequence[ActivePathGlyph], delta: float, side: str) -> None:
    by_path = {gl.path: gl for gl in glyphs}
    for h in hedges:
        gl = by_path[h.path]
        if h.top != gl.hi - delta:
            raise InternalInvariantError(
                f"{side}: hedge of path {h.path} has top {h.top}, active path top minus delta is {gl.hi - delta}"
            )
        if h.color != gl.color:
            raise InternalInvariantError(f"{side}: hedge of path {h.path} and its active path differ in color")
    ordered = sorted(hedges, key=lambda h: (h.lowest_tree_column, h.first_column))
    cols = [by_path[h.path].column for h in ordered]
    if any(a >= b for a, b in zip(cols, cols[1:])):
        raise InternalInvariantError(f"{side}: lowest-leaf order of hedges does not match active path order {cols}")


def build_scene(i: Interleaving, pbd: PathBranchDecomposition, config: LayoutConfig) -> Scene:
    d = i.delta
    t_left, t_right = i.alpha.source, i.alpha.target
    roots = max(t_left.height(t_left.root), t_right.height(t_right.root))
    floor = min(min(t.height(v) for v in t.leaves) for t in (t_left, t_right))
    span = roots - floor
    spacing = d / config.grid_fraction if d > 0 else 0.0
    pad = max(spacing, 0.1 * span) or 1.0
    ceiling = roots + d + pad

    # 左边：T 的列来自 β 的分解，画 α 的树篱；右边对称
    left_cols = build_columns(pbd.beta_paths, pbd.beta_branches, config, ceiling)
    right_cols = build_columns(pbd.alpha_paths, pbd.alpha_branches, config, ceiling)
    left_hedges = _hedges_in(pbd.alpha_branches, left_cols, pbd.beta_paths, ceiling, d, config)
    right_hedges = _hedges_in(pbd.beta_branches, right_cols, pbd.alpha_paths, ceiling, d, config)

    left_colors = color_hedges(left_hedges, hedge_adjacency(left_hedges), config.colors)
    right_colors = color_hedges(right_hedges, hedge_adjacency(right_hedges), config.colors)
    left_hedges = [replace(h, color=c) for h, c in zip(left_hedges, left_colors)]
    right_hedges = [replace(h, color=c) for h, c in zip(right_hedges, right_colors)]

    # 一侧的树篱颜色 = 另一侧对应活动路径的颜色
    right_glyphs = _glyphs(left_hedges, left_colors, pbd.alpha_branches, ceiling)
    left_glyphs = _glyphs(right_hedges, right_colors, pbd.beta_branches, ceiling)

    _check_correspondence(left_hedges, right_glyphs, d, "left")
    _check_correspondence(right_hedges, left_glyphs, d, "right")

    left = TreeLayout(
        t_left,
        tuple(left_cols),
        tuple(build_connectors(pbd.beta_paths)),
        tuple(left_hedges),
        tuple(left_glyphs),
    )
    right = TreeLayout(
        t_right,
        tuple(right_cols),
        tuple(build_connectors(pbd.alpha_paths)),
        tuple(right_hedges),
        tuple(right_glyphs),
    )
    for side, lay in (("left", left), ("right", right)):
        bad = layout_violations(lay)
        if bad:
            raise InternalInvariantError(f"{side} layout: {bad[0]}")

    grid = grid_heights(floor, ceiling, spacing, config.max_grid_lines)
    logger.debug(
        "scene: %d/%d columns, %d/%d hedges, %d grid lines, ceiling %.6g",
        len(left_cols),
        len(right_cols),
        len(left_hedges),
        len(right_hedges),
        len(grid),
        ceiling,
    )
    return Scene(left, right, tuple(grid), d, ceiling, floor, config.colors, spacing)


def _fin(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


def scene_dump(scene: Scene) -> Dict[str, Any]:
    def side(lay: TreeLayout) -> Dict[str, Any]:
        return {
            "columns": [
                {
                    "index": c.index,
                    "leaf": c.leaf,
                    "x": c.x,
                    "width": c.width,
                    "active": c.active,
                    "bottom": c.bottom,
                    "top": _fin(c.top),
                }
                for c in lay.columns
            ],
            "connectors": [
                {"vertex": c.vertex, "height": c.height, "first": c.first, "last": c.last} for c in lay.connectors
            ],
            "hedges": [
                {
                    "path": h.path,
                    "color": h.color,
                    "top": h.top,
                    "components": h.components,
                    "bars": [
                        {"column": b.column, "kind": b.kind, "bottom": b.bottom, "top": b.top} for b in h.bars
                    ],
                    "bridges": [
                        {"left": br.left, "right": br.right, "bottom": br.bottom, "top": br.top} for br in h.bridges
                    ],
                }
                for h in lay.hedges
            ],
            "glyphs": [
                {"path": g.path, "column": g.column, "lo": g.lo, "hi": g.hi, "color": g.color} for g in lay.glyphs
            ],
        }

    return {
        "delta": scene.delta,
        "ceiling": scene.ceiling,
        "floor": scene.floor,
        "grid_spacing": scene.grid_spacing,
        "grid": list(scene.grid),
        "palette_size": scene.palette_size,
        "left": side(scene.left),
        "right": side(scene.right),
    }
