"""Scene -> SVG。

图层顺序固定：hedge、grid、tree、active、glyph；每个元素带同名 CSS class。
所有坐标先格式化成 3 位小数的字符串再交给 drawsvg，保证输出逐字节确定。
"""
from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple

import drawsvg as draw

from .config import LayoutConfig, RenderConfig
from .errors import ConfigError
from .layout import Hedge, Scene, TreeLayout

logger = logging.getLogger(__name__)


def _f(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


class _Frame:
    """高度 -> 像素 y；列坐标 -> 像素 x。"""

    def __init__(self, scene: Scene, c: RenderConfig):
        wl, wr = scene.left.total_width, scene.right.total_width
        usable_w = c.width - 2 * c.margin - c.gap
        usable_h = c.height - 2 * c.margin
        if usable_w <= 0 or usable_h <= 0:
            raise ConfigError(f"canvas {c.width}x{c.height} leaves no room after margins and gap")
        if wl + wr <= 0:
            raise ConfigError("scene has no columns")
        self.c = c
        self.sx = usable_w / (wl + wr)
        self.ceil = scene.ceiling
        self.floor = scene.floor
        self.usable_h = usable_h
        self.left_x0 = c.margin
        self.right_x0 = c.margin + wl * self.sx + c.gap

    def y(self, h: float) -> float:
        return self.c.margin + (self.ceil - h) / (self.ceil - self.floor) * self.usable_h

    def x(self, x0: float, units: float) -> float:
        return x0 + units * self.sx


def _hedge_outline(h: Hedge, lay: TreeLayout, fr: _Frame, x0: float, eps: float) -> str:
    cols = lay.columns
    bars = h.bars
    y_top = fr.y(h.top)

    def left(k: int) -> float:
        col = cols[bars[k].column]
        return fr.x(x0, col.x - col.width / 2)

    def right(k: int) -> float:
        col = cols[bars[k].column]
        return fr.x(x0, col.x + col.width / 2)

    def yb(k: int) -> float:
        b = bars[k]
        return fr.y(min(b.bottom, b.top - eps))

    n = len(bars) - 1
    parts = [f"M{_f(left(0))} {_f(y_top)}", f"H{_f(right(n))}", f"V{_f(yb(n))}", f"H{_f(left(n))}"]
    for k in range(n - 1, -1, -1):
        parts.append(f"V{_f(yb(k))}")
        parts.append(f"H{_f(left(k))}")
    parts.append("Z")
    return " ".join(parts)


def render_svg(s: Scene, c: RenderConfig, layout: Optional[LayoutConfig] = None) -> bytes:
    layout = layout or LayoutConfig()
    c.require_colors(s.palette_size)
    fr = _Frame(s, c)
    eps = layout.min_visual_fraction * (s.ceiling - s.floor)

    # 左边画 α 的树篱（palette_a），右边画 β 的；活动路径用对方树篱的颜色
    sides: List[Tuple[TreeLayout, float, Sequence[str], Sequence[str]]] = [
        (s.left, fr.left_x0, c.palette_a, c.palette_b),
        (s.right, fr.right_x0, c.palette_b, c.palette_a),
    ]

    d = draw.Drawing(c.width, c.height)
    counts = {"hedge": 0, "grid": 0, "tree": 0, "active": 0, "glyph": 0}

    for lay, x0, hedge_pal, _ in sides:
        for h in lay.hedges:
            d.append(
                draw.Path(
                    d=_hedge_outline(h, lay, fr, x0, eps),
                    fill=hedge_pal[h.color],
                    stroke="none",
                    class_="hedge",
                )
            )
            counts["hedge"] += 1

    x_lo, x_hi = _f(c.margin), _f(c.width - c.margin)
    for gh in s.grid:
        yy = _f(fr.y(gh))
        d.append(
            draw.Path(
                d=f"M{x_lo} {yy} H{x_hi}",
                stroke="#000000",
                stroke_width=_f(c.grid_stroke),
                stroke_opacity=_f(c.grid_opacity),
                fill="none",
                class_="grid",
            )
        )
        counts["grid"] += 1

    for lay, x0, _, _ in sides:
        for col in lay.columns:
            xx = _f(fr.x(x0, col.x))
            d.append(
                draw.Path(
                    d=f"M{xx} {_f(fr.y(col.bottom))} V{_f(fr.y(col.top))}",
                    stroke="#000000",
                    stroke_width=_f(c.tree_stroke),
                    fill="none",
                    class_="tree",
                )
            )
            counts["tree"] += 1
        for con in lay.connectors:
            yy = _f(fr.y(con.height))
            xa = _f(fr.x(x0, lay.columns[con.first].x))
            xb = _f(fr.x(x0, lay.columns[con.last].x))
            d.append(
                draw.Path(
                    d=f"M{xa} {yy} H{xb}",
                    stroke="#000000",
                    stroke_width=_f(c.tree_stroke),
                    fill="none",
                    class_="tree",
                )
            )
            counts["tree"] += 1

    glyphs: List[Tuple[float, float, float, str]] = []
    for lay, x0, _, glyph_pal in sides:
        for g in lay.glyphs:
            col = lay.columns[g.column]
            xx = fr.x(x0, col.x)
            stroke = layout.active_stroke_fraction * col.width * fr.sx
            hi = max(g.hi, g.lo + eps)
            d.append(
                draw.Path(
                    d=f"M{_f(xx)} {_f(fr.y(g.lo))} V{_f(fr.y(hi))}",
                    stroke=glyph_pal[g.color],
                    stroke_width=_f(stroke),
                    fill="none",
                    class_="active",
                )
            )
            counts["active"] += 1
            glyphs.append((xx, fr.y(g.hi), layout.glyph_scale * stroke, glyph_pal[g.color]))

    for xx, yy, side, color in glyphs:
        d.append(
            draw.Rectangle(
                _f(xx - side / 2),
                _f(yy - side / 2),
                _f(side),
                _f(side),
                fill=color,
                stroke="#000000",
                stroke_width=_f(c.tree_stroke),
                class_="glyph",
            )
        )
        counts["glyph"] += 1

    logger.debug("svg elements: %s", counts)
    return d.as_svg().encode("utf-8")
