"""有序合并树的 Euler 巡游曲线，以及一维分段线性曲线之间的（连续）Fréchet 距离。

判定过程是标准的 free-space 可达性：逐行（第二条曲线的一段）推进，
行内沿第一条曲线的可达下界用分段累计最大值一次算完。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import PreconditionError
from .mergetree import OrderedMergeTree, vertex_lca

logger = logging.getLogger(__name__)

EMPTY_LO = 2.0
EMPTY_HI = -1.0
MAX_CANDIDATES = 8_000_000


@dataclass(frozen=True)
class EulerTourCurve:
    values: Tuple[float, ...]
    vertices: Tuple[str, ...]  # 每个断点对应的顶点：根、叶子、相邻叶子的 LCA

    def __len__(self) -> int:
        return len(self.values)

    @property
    def leaf_count(self) -> int:
        return (len(self.values) - 1) // 2

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def euler_tour(t: OrderedMergeTree) -> EulerTourCurve:
    root = t.root
    verts: List[str] = [root]
    leaves = t.leaves
    for k, leaf in enumerate(leaves):
        if k > 0:
            verts.append(vertex_lca(t, leaves[k - 1], leaf))
        verts.append(leaf)
    verts.append(root)
    return EulerTourCurve(tuple(t.height(v) for v in verts), tuple(verts))


# ---- free space ----
def _eps(eps: float) -> float:
    return eps * (1 + 1e-12) + 1e-12


def _free(a: np.ndarray, b: np.ndarray, p: np.ndarray | float, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    """线段 a + u*b（u∈[0,1]）上与 p 距离 ≤ eps 的区间，逐元素；空区间为 (2, -1)。"""
    a, b, p = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(p, float))
    with np.errstate(divide="ignore", invalid="ignore"):
        u1 = (p - eps - a) / b
        u2 = (p + eps - a) / b
    flat = b == 0
    lo = np.where(flat, 0.0, np.maximum(np.minimum(u1, u2), 0.0))
    hi = np.where(flat, 1.0, np.minimum(np.maximum(u1, u2), 1.0))
    ok = np.where(flat, np.abs(p - a) <= eps, lo <= hi)
    return np.where(ok, lo, EMPTY_LO), np.where(ok, hi, EMPTY_HI)


@dataclass
class _Reach:
    ok: bool
    lr_lo: Optional[np.ndarray] = None  # (m, n+1)：第 j 行竖边 s=i 上可达区间
    lr_hi: Optional[np.ndarray] = None
    br_lo: Optional[np.ndarray] = None  # (m, n)：第 j 行底边（t=j）上可达区间
    br_hi: Optional[np.ndarray] = None


def _reach(P: np.ndarray, Q: np.ndarray, eps: float, keep: bool) -> _Reach:
    n, m = len(P) - 1, len(Q) - 1
    e = _eps(eps)
    if abs(P[0] - Q[0]) > e or abs(P[-1] - Q[-1]) > e:
        return _Reach(False)

    dP = np.diff(P)
    Pa = P[:-1]
    idx = np.arange(n + 1)

    # 第 0 行底边：只能沿 t=0 从原点走过来
    Ba, Bb = _free(Pa, dP, Q[0], e)
    full = (Ba == 0.0) & (Bb == 1.0)
    prefix = np.concatenate(([True], np.cumprod(full[:-1]).astype(bool)))
    br_lo = np.where(prefix & (Ba == 0.0), 0.0, EMPTY_LO)
    br_hi = np.where(br_lo == 0.0, Bb, EMPTY_HI)
    col0_ok = True

    store = (
        (np.empty((m, n + 1)), np.empty((m, n + 1)), np.empty((m, n)), np.empty((m, n))) if keep else None
    )

    ok = False
    for j in range(m):
        La, Lb = _free(np.full(n + 1, Q[j]), np.full(n + 1, Q[j + 1] - Q[j]), P, e)
        lr0 = 0.0 if (col0_ok and La[0] == 0.0) else EMPTY_LO
        col0_ok = col0_ok and La[0] == 0.0 and Lb[0] == 1.0

        br_ne = br_lo <= 1.0
        V = np.concatenate(([lr0], La[1:]))
        Vb = np.concatenate(([1.0], Lb[1:]))
        start = np.concatenate(([True], br_ne))
        seg = np.cumsum(start) - 1
        run = np.maximum.accumulate(V + 4.0 * seg) - 4.0 * seg
        bad = run > Vb
        cb = np.cumsum(bad)
        sp = np.maximum.accumulate(np.where(start, idx, 0))
        valid = (cb - (cb[sp] - bad[sp])) == 0
        lr_lo = np.where(valid, run, EMPTY_LO)
        lr_hi = np.where(valid, Lb, EMPTY_HI)

        if store is not None:
            store[0][j], store[1][j], store[2][j], store[3][j] = lr_lo, lr_hi, br_lo, br_hi

        Ta, Tb = _free(Pa, dP, Q[j + 1], e)
        lr_ne = lr_lo[:-1] <= 1.0
        top = np.where(lr_ne, Ta, np.where(br_ne, np.maximum(Ta, br_lo), EMPTY_LO))
        top = np.where(top <= Tb, top, EMPTY_LO)

        if j == m - 1:
            ok = bool((lr_lo[n] <= 1.0 and Lb[n] == 1.0) or (top[n - 1] <= 1.0 and Tb[n - 1] == 1.0))
        br_lo = top
        br_hi = np.where(top <= 1.0, Tb, EMPTY_HI)

    if store is None:
        return _Reach(ok)
    return _Reach(ok, *store)


def _point_distance(P: np.ndarray, Q: np.ndarray) -> float:
    """有一条曲线只有一个点：距离就是另一条曲线到该点的最大偏差。"""
    if len(P) == 1:
        return float(np.max(np.abs(Q - P[0])))
    return float(np.max(np.abs(P - Q[0])))


def frechet_decision(c1: EulerTourCurve | Sequence[float], c2: EulerTourCurve | Sequence[float], eps: float) -> bool:
    P, Q = _as_array(c1), _as_array(c2)
    if eps < 0:
        return False
    if len(P) == 1 or len(Q) == 1:
        return _point_distance(P, Q) <= _eps(eps)
    return _reach(P, Q, eps, keep=False).ok


def _as_array(c: EulerTourCurve | Sequence[float]) -> np.ndarray:
    a = c.as_array() if isinstance(c, EulerTourCurve) else np.asarray(c, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise PreconditionError("curve must be a non-empty sequence of heights")
    return a


def _candidates(P: np.ndarray, Q: np.ndarray) -> Optional[np.ndarray]:
    up, uq = np.unique(P), np.unique(Q)
    size = up.size * uq.size + (up.size * up.size + uq.size * uq.size) // 2
    if size > MAX_CANDIDATES:
        return None
    cross = np.abs(up[:, None] - uq[None, :]).ravel()
    iu = np.triu_indices(up.size, 1)
    half_p = (np.abs(up[:, None] - up[None, :]) / 2)[iu]
    iq = np.triu_indices(uq.size, 1)
    half_q = (np.abs(uq[:, None] - uq[None, :]) / 2)[iq]
    return np.unique(np.concatenate((cross, half_p, half_q)))


def frechet_delta(
    c1: EulerTourCurve | Sequence[float],
    c2: EulerTourCurve | Sequence[float],
    tolerance: float = 1e-9,
) -> float:
    P, Q = _as_array(c1), _as_array(c2)
    if len(P) == 1 or len(Q) == 1:
        return _point_distance(P, Q)

    lower = max(abs(P[0] - Q[0]), abs(P[-1] - Q[-1]))
    if _reach(P, Q, lower, keep=False).ok:
        return float(lower)

    cands = _candidates(P, Q)
    if cands is not None:
        cands = cands[cands > lower]
        lo, hi = 0, len(cands) - 1
        steps = 0
        while lo < hi:
            mid = (lo + hi) // 2
            steps += 1
            if _reach(P, Q, float(cands[mid]), keep=False).ok:
                hi = mid
            else:
                lo = mid + 1
        logger.debug("frechet: exact search over %d critical values, %d decisions", len(cands), steps)
        return float(cands[lo])

    lo_v = float(lower)
    hi_v = float(max(P.max(), Q.max()) - min(P.min(), Q.min()))
    steps = 0
    while hi_v - lo_v > tolerance:
        mid = (lo_v + hi_v) / 2
        steps += 1
        if _reach(P, Q, mid, keep=False).ok:
            hi_v = mid
        else:
            lo_v = mid
    logger.debug("frechet: bisection to %g in %d decisions", tolerance, steps)
    return hi_v


@dataclass(frozen=True)
class FrechetMatching:
    """参数空间里的单调折线：(s, t)，s ∈ [0, n] 沿第一条曲线，t ∈ [0, m] 沿第二条。"""

    epsilon: float
    points: Tuple[Tuple[float, float], ...]

    def t_at(self, s: float) -> float:
        """s 处匹配到的第二条曲线参数（竖直段取最小的 t）。"""
        pts = self.points
        for k, (sk, tk) in enumerate(pts):
            if sk >= s:
                if sk == s or k == 0:
                    return tk
                s0, t0 = pts[k - 1]
                return t0 + (s - s0) / (sk - s0) * (tk - t0)
        return pts[-1][1]

    def s_at(self, t: float) -> float:
        pts = self.points
        for k, (sk, tk) in enumerate(pts):
            if tk >= t:
                if tk == t or k == 0:
                    return sk
                s0, t0 = pts[k - 1]
                return s0 + (t - t0) / (tk - t0) * (sk - s0)
        return pts[-1][0]


def _at(C: np.ndarray, u: float) -> float:
    k = min(int(u), len(C) - 2)
    return float(C[k] + (u - k) * (C[k + 1] - C[k]))


def frechet_matching(
    c1: EulerTourCurve | Sequence[float],
    c2: EulerTourCurve | Sequence[float],
    eps: Optional[float] = None,
) -> FrechetMatching:
    P, Q = _as_array(c1), _as_array(c2)
    if eps is None:
        eps = frechet_delta(P, Q)
    n, m = len(P) - 1, len(Q) - 1
    if n == 0 or m == 0:
        if _point_distance(P, Q) > _eps(eps):
            raise PreconditionError(f"curves are farther apart than {eps}")
        return FrechetMatching(eps, ((0.0, 0.0), (float(n), float(m))))

    r = _reach(P, Q, eps, keep=True)
    if not r.ok:
        raise PreconditionError(f"no monotone matching within {eps}")
    assert r.lr_lo is not None and r.lr_hi is not None and r.br_lo is not None and r.br_hi is not None

    pts: List[Tuple[float, float]] = [(float(n), float(m))]
    s, t = float(n), float(m)
    i, j = n - 1, m - 1
    while True:
        sl, tl = s - i, t - j
        choices = []
        lo, hi = r.lr_lo[j, i], r.lr_hi[j, i]
        if lo <= 1.0:
            tp = min(tl, hi)
            if tp >= lo:
                choices.append((abs(P[i] - _at(Q, j + tp)), 0, float(i), j + tp))
        lo, hi = r.br_lo[j, i], r.br_hi[j, i]
        if lo <= 1.0:
            sp = min(sl, hi)
            if sp >= lo:
                choices.append((abs(_at(P, i + sp) - Q[j]), 1, i + sp, float(j)))
        if not choices:
            raise PreconditionError(f"matching backtrack stuck in cell ({i}, {j})")
        _, side, s, t = min(choices)
        pts.append((s, t))
        if side == 0:
            if i == 0:
                break
            i -= 1
        else:
            if j == 0:
                break
            j -= 1
    pts.append((0.0, 0.0))

    out: List[Tuple[float, float]] = []
    for p in reversed(pts):
        if not out or out[-1] != p:
            out.append(p)
    logger.debug("matching at eps=%g: %d breakpoints", eps, len(out))
    return FrechetMatching(float(eps), tuple(out))
