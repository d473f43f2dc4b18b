"""δ-shift map 与单调 δ-interleaving：表示、校验、分支区域 B_e / B_π。

shift map 只存叶子像；内部点的像 = 任一后代叶子像在 f(x)+δ 处的祖先。
每条源边的像是目标树里一条向上的链（image chain），边权与分支都从这些链一次算出。
"""
from __future__ import annotations

import bisect
import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import groupby
from typing import TYPE_CHECKING, Any, Dict, List, Mapping, Optional, Tuple

from networkx.utils import UnionFind

from .errors import InterleavingValidationError, PreconditionError, TreeParseError, Violation
from .mergetree import OrderedMergeTree, TreePoint, ancestor_at_height

if TYPE_CHECKING:
    from .decomposition import PathDecomposition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImageChain:
    """源边 (u, parent(u)) 的像依次经过的目标边。"""

    source_edge: str
    edges: Tuple[str, ...]
    start: float  # 像在第一条目标边上的起始高度（目标树高度）
    end: float  # 像的上确界高度 f(parent(u))+δ；根边为 inf
    exits_top: bool  # 最后一条目标边是否恰好在其上端点处离开


@dataclass(frozen=True)
class EdgeTable:
    weight: Dict[str, int]
    low: Dict[str, float]  # 每条目标边上被映到的最低高度


@dataclass(frozen=True, eq=False)
class ShiftMap:
    delta: float
    source: OrderedMergeTree
    target: OrderedMergeTree
    leaf_images: Mapping[str, TreePoint]

    @cached_property
    def violations(self) -> List[Violation]:
        return validate_shift_map(self)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    @cached_property
    def _images(self) -> Tuple[Dict[str, TreePoint], List[Violation]]:
        src, tgt, d = self.source, self.target, self.delta
        imgs: Dict[str, TreePoint] = {}
        conflicts: List[Violation] = []
        for v in reversed(src.preorder):
            kids = src.children(v)
            if not kids:
                imgs[v] = self.leaf_images[v]
                continue
            h = src.height(v) + d
            first = ancestor_at_height(tgt, imgs[kids[0]], h)
            for c in kids[1:]:
                q = ancestor_at_height(tgt, imgs[c], h)
                if q.edge != first.edge:
                    conflicts.append(
                        Violation(
                            "well-defined",
                            v,
                            f"children {kids[0]} and {c} lift to different points "
                            f"({first.edge} vs {q.edge}) at height {h}",
                        )
                    )
                    break
            imgs[v] = first
        return imgs, conflicts

    @property
    def vertex_images(self) -> Dict[str, TreePoint]:
        return self._images[0]

    @cached_property
    def chains(self) -> Dict[str, ImageChain]:
        src, tgt, d = self.source, self.target, self.delta
        vimg = self.vertex_images
        out: Dict[str, ImageChain] = {}
        for u in src.preorder:
            start = vimg[u]
            pu = src.parent[u]
            end = math.inf if pu is None else src.height(pu) + d
            x = start.edge
            edges = [x]
            px = tgt.parent[x]
            while px is not None and tgt.height(px) < end:
                x = px
                edges.append(x)
                px = tgt.parent[x]
            exits = px is not None and tgt.height(px) == end
            out[u] = ImageChain(u, tuple(edges), start.height, end, exits)
        return out

    @cached_property
    def edge_table(self) -> EdgeTable:
        tgt = self.target
        weight = {x: 0 for x in tgt.preorder}
        low: Dict[str, float] = {}
        for ch in self.chains.values():
            last = len(ch.edges) - 1
            for i, x in enumerate(ch.edges):
                entry = ch.start if i == 0 else tgt.height(x)
                if x not in low or entry < low[x]:
                    low[x] = entry
                if i < last or ch.exits_top:
                    weight[x] += 1
        # 根边只有一个分量：源树根边最终都落在这里
        weight[tgt.root] = 1
        return EdgeTable(weight, low)

    def image_of(self, x: TreePoint) -> TreePoint:
        """不做合法性检查的求值（校验器内部使用）。"""
        return ancestor_at_height(self.target, self.vertex_images[x.edge], x.height + self.delta)


@dataclass(frozen=True)
class Interleaving:
    alpha: ShiftMap
    beta: ShiftMap

    @property
    def delta(self) -> float:
        return self.alpha.delta


# ---- 分支 ----
@dataclass(frozen=True)
class Segment:
    """源树边 edge 上高度区间 [lo, hi] 内的点（顶端开）。"""

    edge: str
    lo: float
    hi: float


@dataclass(frozen=True)
class Component:
    segments: Tuple[Segment, ...]

    @property
    def bottom(self) -> float:
        return min(s.lo for s in self.segments)

    @property
    def top(self) -> float:
        return max(s.hi for s in self.segments)

    def column_intervals(self, columns: "PathDecomposition") -> Dict[int, Tuple[float, float]]:
        """把线段投影到源树的路径分解（列）上：列号 -> (最低, 最高)。"""
        out: Dict[int, Tuple[float, float]] = {}
        for s in self.segments:
            k = columns.path_of[s.edge]
            if k in out:
                lo, hi = out[k]
                out[k] = (min(lo, s.lo), max(hi, s.hi))
            else:
                out[k] = (s.lo, s.hi)
        return dict(sorted(out.items()))


@dataclass(frozen=True)
class Branch:
    path: int
    path_top: float
    delta: float
    components: Tuple[Component, ...]

    @property
    def size(self) -> int:
        return len(self.components)

    @property
    def is_empty(self) -> bool:
        return not self.components

    @property
    def top_height(self) -> float:
        return self.path_top - self.delta

    @property
    def bottom_height(self) -> Optional[float]:
        if not self.components:
            return None
        return min(c.bottom for c in self.components)

    @property
    def active_interval(self) -> Optional[Tuple[float, float]]:
        if not self.components:
            return None
        return (self.bottom_height + self.delta, self.path_top)  # type: ignore[operator]


@dataclass(frozen=True)
class EdgeBranch:
    edge: str
    segments: Tuple[Segment, ...]
    weight: int


def edge_weights(m: ShiftMap) -> Dict[str, int]:
    _require_valid(m)
    return dict(m.edge_table.weight)


def branch_of_edge(m: ShiftMap, e: str) -> EdgeBranch:
    _require_valid(m)
    src, tgt, d = m.source, m.target, m.delta
    if e not in tgt.nodes:
        raise PreconditionError(f"unknown target edge {e!r}")
    segs: List[Segment] = []
    for u in src.preorder:
        ch = m.chains[u]
        if e not in ch.edges:
            continue
        i = ch.edges.index(e)
        lo = src.height(u) if i == 0 else tgt.height(e) - d
        if i < len(ch.edges) - 1:
            hi = tgt.height(ch.edges[i + 1]) - d
        else:
            pu = src.parent[u]
            hi = math.inf if pu is None else src.height(pu)
        segs.append(Segment(u, lo, hi))
    segs.sort(key=lambda s: (src.span[s.edge][0], s.lo))
    return EdgeBranch(e, tuple(segs), m.edge_table.weight[e])


def path_branches(m: ShiftMap, paths: "PathDecomposition") -> List[Branch]:
    """一次遍历所有像链，按目标路径切段并用并查集合并成连通分量。"""
    _require_valid(m)
    src, tgt, d = m.source, m.target, m.delta
    path_of = paths.path_of

    segs: List[Segment] = []
    seg_path: List[int] = []
    first_seg: Dict[str, int] = {}
    last_seg: Dict[str, int] = {}
    for u in src.preorder:
        ch = m.chains[u]
        first_seg[u] = len(segs)
        lo = src.height(u)
        cur = path_of[ch.edges[0]]
        for x in ch.edges[1:]:
            k = path_of[x]
            if k != cur:
                cut = tgt.height(x) - d
                segs.append(Segment(u, lo, cut))
                seg_path.append(cur)
                lo, cur = cut, k
        pu = src.parent[u]
        segs.append(Segment(u, lo, math.inf if pu is None else src.height(pu)))
        seg_path.append(cur)
        last_seg[u] = len(segs) - 1

    uf = UnionFind(range(len(segs)))
    for u in src.preorder:
        pu = src.parent[u]
        if pu is None:
            continue
        a, b = last_seg[u], first_seg[pu]
        if seg_path[a] == seg_path[b]:
            uf.union(a, b)
    groups = sorted((sorted(s) for s in uf.to_sets()), key=lambda g: g[0])

    per_path: Dict[int, List[Component]] = {k: [] for k in range(len(paths.paths))}
    for members in groups:
        members.sort(key=lambda i: (src.span[segs[i].edge][0], segs[i].lo))
        comp = Component(tuple(segs[i] for i in members))
        per_path[seg_path[members[0]]].append(comp)

    out: List[Branch] = []
    for k in range(len(paths.paths)):
        comps = sorted(per_path[k], key=lambda c: src.span[c.segments[0].edge][0])
        out.append(Branch(k, paths.path_top_height(k), d, tuple(comps)))
    logger.debug(
        "branches: %d paths, %d components, %d segments",
        len(out),
        sum(b.size for b in out),
        len(segs),
    )
    return out


def branch_of_path(m: ShiftMap, paths: "PathDecomposition", index: int) -> Branch:
    return path_branches(m, paths)[index]


# ---- 求值与校验 ----
def _require_valid(m: ShiftMap) -> None:
    if m.violations:
        raise InterleavingValidationError("invalid shift map", m.violations)


def evaluate(m: ShiftMap, x: TreePoint) -> TreePoint:
    _require_valid(m)
    if not m.source.contains(x):
        raise PreconditionError(f"point {x.edge}@{x.height} is not on the source tree")
    return m.image_of(x)


def validate_shift_map(m: ShiftMap) -> List[Violation]:
    src, tgt, d = m.source, m.target, m.delta
    out: List[Violation] = []
    if not (math.isfinite(d) and d >= 0):
        return [Violation("delta", "delta", f"delta must be finite and >= 0, got {d}")]

    for leaf in src.leaves:
        p = m.leaf_images.get(leaf)
        if p is None:
            out.append(Violation("missing-image", leaf, "leaf has no image"))
        elif not tgt.contains(p):
            out.append(Violation("image-point", leaf, f"{p.edge}@{p.height} is not a point of the target tree"))
        elif p.height != src.height(leaf) + d:
            out.append(
                Violation(
                    "shift",
                    leaf,
                    f"image height {p.height} != f({leaf}) + delta = {src.height(leaf) + d}",
                )
            )
    for k in m.leaf_images:
        if k not in src.leaf_rank:
            out.append(Violation("unknown-leaf", k, "image given for a vertex that is not a source leaf"))
    if out:
        return out

    conflicts = m._images[1]
    if conflicts:
        return list(conflicts)
    return _monotone_sweep(m)


def _monotone_sweep(m: ShiftMap) -> List[Violation]:
    """按高度扫描源树：每条新出现的边只需和 ≤_h 中的前后邻居比较一次。

    两条共存的源边的像一旦顺序正确，之后要么保持、要么合并，所以只在共同区间的起点检查。
    """
    src, tgt, d = m.source, m.target, m.delta
    vimg = m.vertex_images
    out: List[Violation] = []
    active: List[Tuple[int, str]] = []

    def key_at(v: str, h: float) -> int:
        return tgt.key(ancestor_at_height(tgt, vimg[v], h))

    order = sorted(src.preorder, key=lambda v: (src.height(v), src.pre_index[v]))
    for h, grp in groupby(order, key=src.height):
        group = list(grp)
        for v in group:
            for c in src.children(v):
                item = (src.span[c][0], c)
                i = bisect.bisect_left(active, item)
                if i < len(active) and active[i] == item:
                    del active[i]
        hv = h + d
        for v in group:
            item = (src.span[v][0], v)
            i = bisect.bisect_left(active, item)
            active.insert(i, item)
            kv = tgt.key(vimg[v])
            if i > 0:
                pred = active[i - 1][1]
                if key_at(pred, hv) > kv:
                    out.append(
                        Violation(
                            "monotone",
                            f"{pred}<{v}",
                            f"at height {h}: {pred} precedes {v} but its image lies to the right",
                        )
                    )
            if i + 1 < len(active):
                succ = active[i + 1][1]
                if key_at(succ, hv) < kv:
                    out.append(
                        Violation(
                            "monotone",
                            f"{v}<{succ}",
                            f"at height {h}: {v} precedes {succ} but its image lies to the right",
                        )
                    )
    return out


def monotone_violations_at(m: ShiftMap, h: float) -> List[Violation]:
    """直接在单一高度 h 上检查 ≤_h 是否被保持（测试用的朴素判定）。"""
    from .mergetree import order_at_height

    pts = order_at_height(m.source, h)
    keys = [m.target.key(m.image_of(p)) for p in pts]
    out: List[Violation] = []
    for (p, kp), (q, kq) in zip(zip(pts, keys), zip(pts[1:], keys[1:])):
        if kp > kq:
            out.append(Violation("monotone", f"{p.edge}<{q.edge}", f"at height {h}"))
    return out


def critical_samples(m: ShiftMap) -> List[float]:
    """临界高度（源顶点高度、目标顶点高度 - δ）及相邻临界高度的中点。"""
    src, tgt, d = m.source, m.target, m.delta
    base = min(src.height(v) for v in src.leaves)
    hs = {src.height(v) for v in src.preorder}
    hs |= {tgt.height(y) - d for y in tgt.preorder if tgt.height(y) - d >= base}
    crit = sorted(hs)
    out = list(crit)
    out += [(a + b) / 2 for a, b in zip(crit, crit[1:])]
    out.append(crit[-1] + 1.0)
    return sorted(out)


def _witnesses(t: OrderedMergeTree, delta: float) -> List[TreePoint]:
    pts = [t.point(v) for v in t.preorder]
    for v in t.preorder:
        p = t.parent[v]
        if p is not None:
            pts.append(TreePoint(v, (t.height(v) + t.height(p)) / 2))
    pts.append(TreePoint(t.root, t.height(t.root) + (2 * delta if delta > 0 else 1.0)))
    return pts


def _round_trip(first: ShiftMap, second: ShiftMap, name: str) -> List[Violation]:
    t = first.source
    out: List[Violation] = []
    for x in _witnesses(t, first.delta):
        y = first.image_of(x)
        z = second.image_of(y)
        expected = ancestor_at_height(t, x, y.height + second.delta)
        if z != expected:
            out.append(
                Violation(
                    "round-trip",
                    f"{name}:{x.edge}@{x.height}",
                    f"composition lands on edge {z.edge}, expected ancestor on edge {expected.edge} at {expected.height}",
                )
            )
    return out


def validate_interleaving(i: Interleaving) -> List[Violation]:
    a, b = i.alpha, i.beta
    out: List[Violation] = []
    if a.delta != b.delta:
        out.append(Violation("delta-mismatch", "delta", f"alpha delta {a.delta} != beta delta {b.delta}"))
    if a.source is not b.target or a.target is not b.source:
        out.append(Violation("trees", "maps", "alpha and beta must map between the same two trees"))
    if out:
        return out
    for name, m in (("alpha", a), ("beta", b)):
        out.extend(Violation(v.rule, f"{name}:{v.subject}", v.message) for v in m.violations)
    if out:
        return out
    out.extend(_round_trip(a, b, "alpha"))
    out.extend(_round_trip(b, a, "beta"))
    return out


# ---- JSON ----
def _images_from_dict(raw: Any, label: str) -> Dict[str, TreePoint]:
    if not isinstance(raw, dict):
        raise TreeParseError(f"{label} must be an object")
    out: Dict[str, TreePoint] = {}
    for leaf, p in raw.items():
        if not isinstance(p, dict) or "edge" not in p or "height" not in p:
            raise TreeParseError(f"{label}[{leaf!r}] must have edge and height")
        h = p["height"]
        if isinstance(h, bool) or not isinstance(h, (int, float)):
            raise TreeParseError(f"{label}[{leaf!r}].height must be a number")
        out[str(leaf)] = TreePoint(str(p["edge"]), float(h))
    return out


def read_interleaving(data: bytes | str, tree_a: OrderedMergeTree, tree_b: OrderedMergeTree) -> Interleaving:
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise TreeParseError(f"invalid JSON: {e}") from e
    if not isinstance(raw, dict) or "delta" not in raw:
        raise TreeParseError("missing field: delta")
    d = raw["delta"]
    if isinstance(d, bool) or not isinstance(d, (int, float)):
        raise TreeParseError("delta must be a number")
    alpha = _images_from_dict(raw.get("alpha"), "alpha")
    beta = _images_from_dict(raw.get("beta"), "beta")
    return Interleaving(
        ShiftMap(float(d), tree_a, tree_b, alpha),
        ShiftMap(float(d), tree_b, tree_a, beta),
    )


def interleaving_to_dict(i: Interleaving) -> Dict[str, Any]:
    def images(m: ShiftMap) -> Dict[str, Any]:
        return {leaf: m.leaf_images[leaf].as_dict() for leaf in m.source.leaves if leaf in m.leaf_images}

    return {"delta": i.delta, "alpha": images(i.alpha), "beta": images(i.beta)}


def write_interleaving(i: Interleaving) -> bytes:
    return (json.dumps(interleaving_to_dict(i), ensure_ascii=False, indent=2) + "\n").encode("utf-8")
