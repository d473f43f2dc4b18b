from __future__ import annotations

import itertools

import numpy as np
import pytest

import parkview.frechet as frechet
from conftest import n_runs
from parkview.errors import PreconditionError
from parkview.frechet import (
    FrechetMatching,
    euler_tour,
    frechet_decision,
    frechet_delta,
    frechet_matching,
)


def test_euler_tour(two_leaf, one_leaf):
    c = euler_tour(two_leaf)
    assert c.values == (3.0, 0.0, 3.0, 1.0, 3.0)
    assert c.vertices == ("r", "a", "r", "b", "r")
    assert c.leaf_count == 2
    assert euler_tour(one_leaf).values == (0.0, 0.0, 0.0)


def test_small_examples():
    assert frechet_delta([3, 0, 3], [3, 1, 3]) == 1.0
    assert frechet_delta([3, 0, 3, 1, 3], [3, 0, 3, 1, 3]) == 0.0
    assert frechet_delta([2.0], [0.0, 5.0, 1.0]) == 3.0
    # 端点距离就是答案
    assert frechet_delta([0, 4], [1, 5]) == 1.0
    # 第二条曲线多一个来回：需要半个来回的距离
    assert frechet_delta([0, 4], [0, 3, 1, 4]) == 1.0


def test_decision_threshold():
    P, Q = [3, 0, 3, 1, 3], [3, 1, 3]
    d = frechet_delta(P, Q)
    assert frechet_decision(P, Q, d)
    assert not frechet_decision(P, Q, d - 1e-6)
    assert not frechet_decision(P, Q, -1.0)


def test_bad_curve():
    with pytest.raises(PreconditionError):
        frechet_delta([], [1.0])


# ---- 独立的标量 free-space 判定 ----
def _at(C, s):
    k = min(int(s), len(C) - 2)
    return C[k] + (s - k) * (C[k + 1] - C[k])


def _interval(a, b, p, eps):
    """{u in [0,1] : |a + u (b - a) - p| <= eps}，空集返回 None。"""
    if a == b:
        return (0.0, 1.0) if abs(a - p) <= eps else None
    u1, u2 = (p - eps - a) / (b - a), (p + eps - a) / (b - a)
    lo, hi = max(min(u1, u2), 0.0), min(max(u1, u2), 1.0)
    return (lo, hi) if lo <= hi else None


def _decide(P, Q, eps):
    n, m = len(P) - 1, len(Q) - 1
    if abs(P[0] - Q[0]) > eps or abs(P[-1] - Q[-1]) > eps:
        return False
    # left[i][j]：s = i 的竖边在第 j 行的可达区间；bottom[i][j]：t = j 的横边在第 i 列的可达区间
    left = [[None] * m for _ in range(n + 1)]
    bottom = [[None] * (m + 1) for _ in range(n)]
    ok = True
    for j in range(m):
        iv = _interval(Q[j], Q[j + 1], P[0], eps)
        left[0][j] = (0.0, iv[1]) if ok and iv and iv[0] == 0.0 else None
        ok = ok and iv is not None and iv == (0.0, 1.0)
    ok = True
    for i in range(n):
        iv = _interval(P[i], P[i + 1], Q[0], eps)
        bottom[i][0] = (0.0, iv[1]) if ok and iv and iv[0] == 0.0 else None
        ok = ok and iv is not None and iv == (0.0, 1.0)
    for i in range(n):
        for j in range(m):
            lf, bt = left[i][j], bottom[i][j]
            right = _interval(Q[j], Q[j + 1], P[i + 1], eps)
            top = _interval(P[i], P[i + 1], Q[j + 1], eps)
            if right is not None:
                if bt is not None:
                    left[i + 1][j] = right
                elif lf is not None and max(right[0], lf[0]) <= right[1]:
                    left[i + 1][j] = (max(right[0], lf[0]), right[1])
            if top is not None:
                if lf is not None:
                    bottom[i][j + 1] = top
                elif bt is not None and max(top[0], bt[0]) <= top[1]:
                    bottom[i][j + 1] = (max(top[0], bt[0]), top[1])
    end_l, end_b = left[n][m - 1], bottom[n - 1][m]
    return bool((end_l and end_l[1] == 1.0) or (end_b and end_b[1] == 1.0))


def _oracle(P, Q):
    cands = {abs(p - q) for p in P for q in Q}
    cands |= {abs(a - b) / 2 for a, b in itertools.combinations(P, 2)}
    cands |= {abs(a - b) / 2 for a, b in itertools.combinations(Q, 2)}
    for c in sorted(cands):
        if _decide(P, Q, c + 1e-12):
            return c
    raise AssertionError("no candidate value works")


def _discrete(P, Q):
    n, m = len(P), len(Q)
    D = np.full((n, m), np.inf)
    for i in range(n):
        for j in range(m):
            d = abs(P[i] - Q[j])
            if i == 0 and j == 0:
                D[i, j] = d
            else:
                prev = min(
                    D[i - 1, j] if i > 0 else np.inf,
                    D[i, j - 1] if j > 0 else np.inf,
                    D[i - 1, j - 1] if i > 0 and j > 0 else np.inf,
                )
                D[i, j] = max(d, prev)
    return float(D[-1, -1])


def _refine(C, k):
    out = [C[0]]
    for a, b in zip(C, C[1:]):
        out.extend(a + (b - a) * t / k for t in range(1, k + 1))
    return out


def _random_curve(rng, max_points=6):
    n = int(rng.integers(2, max_points + 1))
    return [round(float(x), 2) for x in rng.normal(0.0, 3.0, size=n)]


def test_matches_independent_oracle():
    rng = np.random.default_rng(8)
    for _ in range(n_runs(200, 80)):
        P, Q = _random_curve(rng), _random_curve(rng)
        assert frechet_delta(P, Q) == pytest.approx(_oracle(P, Q), abs=1e-6)


def test_discrete_sandwich():
    rng = np.random.default_rng(12)
    k = 12
    for _ in range(n_runs(60, 15)):
        P, Q = _random_curve(rng, 5), _random_curve(rng, 5)
        d = frechet_delta(P, Q)
        assert d <= _discrete(P, Q) + 1e-9
        Pr, Qr = _refine(P, k), _refine(Q, k)
        step = max(np.max(np.abs(np.diff(Pr))), np.max(np.abs(np.diff(Qr))))
        assert d >= _discrete(Pr, Qr) - step - 1e-9


def test_identical_curves_are_at_distance_zero():
    rng = np.random.default_rng(13)
    for _ in range(20):
        P = _random_curve(rng)
        assert frechet_delta(P, list(P)) == 0.0


def test_bisection_fallback(monkeypatch):
    monkeypatch.setattr(frechet, "MAX_CANDIDATES", 0)
    P, Q = [3, 0, 3, 1, 3], [3, 1, 3]
    assert frechet_delta(P, Q, tolerance=1e-7) == pytest.approx(1.0, abs=1e-6)


# ---- 匹配 ----
def _check_matching(P, Q, mt, eps):
    n, m = len(P) - 1, len(Q) - 1
    pts = mt.points
    assert pts[0] == (0.0, 0.0)
    assert pts[-1] == (float(n), float(m))
    for (s0, t0), (s1, t1) in zip(pts, pts[1:]):
        assert s1 >= s0 and t1 >= t0
        for u in (0.0, 0.5, 1.0):
            s, t = s0 + u * (s1 - s0), t0 + u * (t1 - t0)
            assert abs(_at(P, s) - _at(Q, t)) <= eps + 1e-9


def test_matching_is_monotone_and_within_eps():
    rng = np.random.default_rng(15)
    for _ in range(n_runs(200, 50)):
        P, Q = _random_curve(rng), _random_curve(rng)
        d = frechet_delta(P, Q)
        mt = frechet_matching(P, Q, d)
        _check_matching(P, Q, mt, d)
        slack = d + 0.5
        _check_matching(P, Q, frechet_matching(P, Q, slack), slack)


def test_matching_needs_enough_eps():
    with pytest.raises(PreconditionError):
        frechet_matching([3, 0, 3], [3, 1, 3], 0.5)
    with pytest.raises(PreconditionError):
        frechet_matching([0.0], [3.0, 4.0], 1.0)


def test_matching_lookup():
    mt = FrechetMatching(1.0, ((0.0, 0.0), (1.0, 2.0), (2.0, 2.0)))
    assert mt.t_at(0.5) == 1.0
    assert mt.t_at(1.5) == 2.0
    assert mt.s_at(1.0) == 0.5
    assert mt.s_at(2.0) == 1.0
