from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .errors import ConfigError


# 红色系（α 侧）与蓝色系（β 侧），各 6 级明度
DEFAULT_PALETTE_A: Tuple[str, ...] = ("#e34a33", "#fdbb84", "#b30000", "#fc8d59", "#fee8c8", "#7f0000")
DEFAULT_PALETTE_B: Tuple[str, ...] = ("#3182bd", "#9ecae1", "#08519c", "#6baed6", "#deebf7", "#08306b")


@dataclass(frozen=True)
class LayoutConfig:
    active_width: float = 3.0
    inactive_width: float = 1.0
    compress: bool = True
    grid_fraction: int = 1
    colors: int = 3
    bridge_fraction: float = 0.5
    min_visual_fraction: float = 0.005
    active_stroke_fraction: float = 0.6
    glyph_scale: float = 1.6
    max_grid_lines: int = 400

    def __post_init__(self) -> None:
        if self.grid_fraction < 1:
            raise ConfigError(f"grid_fraction 必须 >= 1，当前 {self.grid_fraction}")
        if self.colors < 3:
            raise ConfigError(f"colors 必须 >= 3，当前 {self.colors}")
        if self.active_width <= 0 or self.inactive_width <= 0:
            raise ConfigError("列宽必须为正数")
        if self.compress and not self.active_width > self.inactive_width:
            raise ConfigError("active_width 必须大于 inactive_width")
        if not 0.0 < self.bridge_fraction < 1.0:
            raise ConfigError(f"bridge_fraction 必须在 (0,1) 内，当前 {self.bridge_fraction}")
        if self.max_grid_lines < 1:
            raise ConfigError("max_grid_lines 必须 >= 1")

    @property
    def column_inactive_width(self) -> float:
        return self.inactive_width if self.compress else self.active_width


@dataclass(frozen=True)
class RenderConfig:
    width: float = 1200.0
    height: float = 720.0
    margin: float = 24.0
    gap: float = 48.0
    palette_a: Tuple[str, ...] = DEFAULT_PALETTE_A
    palette_b: Tuple[str, ...] = DEFAULT_PALETTE_B
    grid_opacity: float = 0.15
    tree_stroke: float = 1.0
    grid_stroke: float = 0.75

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"画布尺寸必须为正：{self.width}x{self.height}")
        if self.margin < 0 or self.gap < 0:
            raise ConfigError("margin/gap 不能为负")
        if 2 * self.margin >= min(self.width, self.height):
            raise ConfigError(f"margin {self.margin} 超出画布 {self.width}x{self.height}")
        if not 0.0 <= self.grid_opacity <= 1.0:
            raise ConfigError(f"grid_opacity 必须在 [0,1] 内，当前 {self.grid_opacity}")
        if self.tree_stroke <= 0 or self.grid_stroke <= 0:
            raise ConfigError("线宽必须为正数")

    def require_colors(self, k: int) -> None:
        for name, pal in (("palette_a", self.palette_a), ("palette_b", self.palette_b)):
            if len(pal) < k:
                raise ConfigError(f"{name} 只有 {len(pal)} 种颜色，需要 {k}")


@dataclass(frozen=True)
class PipelineConfig:
    persistence: float = 0.0
    connectivity: int = 4
    curve: str = "hilbert"  # hilbert | morton
    frechet_tolerance: float = 1e-9
    delta_pad: float = 1e-9

    def __post_init__(self) -> None:
        if self.persistence < 0:
            raise ConfigError(f"persistence 不能为负，当前 {self.persistence}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity 只能是 4 或 8，当前 {self.connectivity}")
        if self.curve not in ("hilbert", "morton"):
            raise ConfigError(f"curve 只能是 hilbert 或 morton，当前 {self.curve}")
        if self.frechet_tolerance <= 0 or self.delta_pad < 0:
            raise ConfigError("frechet_tolerance 必须为正，delta_pad 不能为负")


@dataclass(frozen=True)
class Config:
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    output_dir: str = "data"


@dataclass(frozen=True)
class RunConfig:
    """一次子命令调用解析后的全部输入（配置文件 + 命令行覆盖）。"""

    subcommand: str  # render | compare | validate
    inputs: Tuple[str, ...]
    output: Optional[str]
    config: Config
    stats: Optional[str] = None
    debug_dir: Optional[str] = None

    def __post_init__(self) -> None:
        need = {"render": 3, "compare": 2}.get(self.subcommand)
        if need is not None:
            if len(self.inputs) != need:
                raise ConfigError(f"{self.subcommand} 需要 {need} 个输入文件，收到 {len(self.inputs)}")
            if not self.output:
                raise ConfigError(f"{self.subcommand} 需要 -o 输出路径")
        elif self.subcommand == "validate":
            if not self.inputs:
                raise ConfigError("validate 至少需要一个文件")
        else:
            raise ConfigError(f"未知子命令：{self.subcommand}")
        if self.stats and self.subcommand != "compare":
            raise ConfigError("--stats 只适用于 compare")


def _req(d: Dict[str, Any], key: str) -> Any:
    if key not in d:
        raise KeyError(f"Missing config key: {key}")
    return d[key]


def _palette(values: List[Any]) -> Tuple[str, ...]:
    return tuple(str(v) for v in values)


def default_config() -> Config:
    return Config()


def load_config(path: str | Path = "config.yaml") -> Config:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(
            f"找不到 {p}. 先复制 config.example.yaml 为 config.yaml 再修改。"
        )

    raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{p} 顶层必须是映射")

    layout = raw.get("layout", {}) or {}
    render = raw.get("render", {}) or {}
    pipeline = raw.get("pipeline", {}) or {}
    output = raw.get("output", {}) or {}

    base = Config()
    try:
        render_cfg = base.render
        if render:
            render_cfg = RenderConfig(
                width=float(render.get("width", base.render.width)),
                height=float(render.get("height", base.render.height)),
                margin=float(render.get("margin", base.render.margin)),
                gap=float(render.get("gap", base.render.gap)),
                palette_a=_palette(_req(render, "palette_a")),
                palette_b=_palette(_req(render, "palette_b")),
                grid_opacity=float(render.get("grid_opacity", base.render.grid_opacity)),
                tree_stroke=float(render.get("tree_stroke", base.render.tree_stroke)),
                grid_stroke=float(render.get("grid_stroke", base.render.grid_stroke)),
            )

        cfg = Config(
            layout=LayoutConfig(
                active_width=float(layout.get("active_width", 3.0)),
                inactive_width=float(layout.get("inactive_width", 1.0)),
                compress=bool(layout.get("compress", True)),
                grid_fraction=int(layout.get("grid_fraction", 1)),
                colors=int(layout.get("colors", 3)),
                bridge_fraction=float(layout.get("bridge_fraction", 0.5)),
                min_visual_fraction=float(layout.get("min_visual_fraction", 0.005)),
                active_stroke_fraction=float(layout.get("active_stroke_fraction", 0.6)),
                glyph_scale=float(layout.get("glyph_scale", 1.6)),
                max_grid_lines=int(layout.get("max_grid_lines", 400)),
            ),
            render=render_cfg,
            pipeline=PipelineConfig(
                persistence=float(pipeline.get("persistence", 0.0)),
                connectivity=int(pipeline.get("connectivity", 4)),
                curve=str(pipeline.get("curve", "hilbert")).lower(),
                frechet_tolerance=float(pipeline.get("frechet_tolerance", 1e-9)),
                delta_pad=float(pipeline.get("delta_pad", 1e-9)),
            ),
            output_dir=str(output.get("dir", "data")),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{p}: {e}") from e

    cfg.render.require_colors(cfg.layout.colors)
    return cfg


def with_overrides(cfg: Config, **kw: Any) -> Config:
    """命令行参数覆盖配置文件；值为 None 的参数忽略。"""
    layout_kw = {k: v for k, v in kw.items() if k in ("grid_fraction", "colors") and v is not None}
    pipe_kw = {k: v for k, v in kw.items() if k in ("persistence", "connectivity", "curve") and v is not None}
    out = replace(
        cfg,
        layout=replace(cfg.layout, **layout_kw) if layout_kw else cfg.layout,
        pipeline=replace(cfg.pipeline, **pipe_kw) if pipe_kw else cfg.pipeline,
    )
    out.render.require_colors(out.layout.colors)
    return out
