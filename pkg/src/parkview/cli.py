"""parkview 命令行：render / compare / validate。

退出码：0 成功；1 校验失败（违规写到 stderr）；2 读写、解析或配置错误；3 内部不变量被破坏。
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import typer

from .config import Config, RunConfig, default_config, load_config, with_overrides
from .errors import (
    ConfigError,
    FieldError,
    InternalInvariantError,
    PreconditionError,
    TreeParseError,
    ValidationError,
)
from .runner import run_compare, run_render, run_validate

logger = logging.getLogger(__name__)

__version__ = "0.1.0"

app = typer.Typer(
    add_completion=False,
    help="Draw monotone interleavings between ordered merge trees.",
    invoke_without_command=True,
)


def _setup_logging(verbose: bool) -> None:
    root = logging.getLogger()
    # 只替换自己装的 handler，重复调用（测试里多次 invoke）不会叠加
    for h in list(root.handlers):
        if getattr(h, "_parkview", False):
            root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._parkview = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


@app.callback(invoke_without_command=True)
def main_callback(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", help="YAML config (default: ./config.yaml if present)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable DEBUG logging on stderr"),
    version: bool = typer.Option(False, "--version", "-V", help="Show version and exit."),
) -> None:
    if version:
        typer.echo(f"parkview {__version__}")
        raise typer.Exit()
    if ctx.invoked_subcommand is None:
        typer.echo(ctx.get_help())
        raise typer.Exit()
    _setup_logging(verbose)
    ctx.obj = {"config": config}


def _load(ctx: typer.Context) -> Config:
    path = (ctx.obj or {}).get("config")
    if path is not None:
        return load_config(path)
    if Path("config.yaml").exists():
        return load_config("config.yaml")
    return default_config()


def _run(build: Callable[[], RunConfig], fn: Callable[[RunConfig], Dict[str, Any]]) -> Dict[str, Any]:
    try:
        return fn(build())
    except ValidationError as e:
        typer.echo(f"error: {e}", err=True)
        for v in e.violations:
            typer.echo(f"  {v}", err=True)
        raise typer.Exit(code=1)
    except (InternalInvariantError, PreconditionError) as e:
        typer.echo(f"internal error: {e}", err=True)
        raise typer.Exit(code=3)
    except (OSError, TreeParseError, FieldError, ConfigError, KeyError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=2)


def _echo(summary: Dict[str, Any]) -> None:
    typer.echo(json.dumps(summary, ensure_ascii=False, indent=2))


@app.command("render")
def render(
    ctx: typer.Context,
    tree_a: Path = typer.Option(..., "--tree-a", help="Left tree JSON"),
    tree_b: Path = typer.Option(..., "--tree-b", help="Right tree JSON"),
    interleaving: Path = typer.Option(..., "--interleaving", help="Interleaving JSON"),
    output: Path = typer.Option(..., "--output", "-o", help="SVG output path"),
    grid_fraction: Optional[int] = typer.Option(None, "--grid-fraction", min=1, help="Grid spacing = delta / N"),
    colors: Optional[int] = typer.Option(None, "--colors", min=3, help="Palette size per tree"),
    debug_dir: Optional[Path] = typer.Option(None, "--debug-dir", help="Write decomposition/scene dumps here"),
) -> None:
    """Draw a given interleaving."""

    def build() -> RunConfig:
        cfg = with_overrides(_load(ctx), grid_fraction=grid_fraction, colors=colors)
        return RunConfig(
            "render",
            (str(tree_a), str(tree_b), str(interleaving)),
            str(output),
            cfg,
            debug_dir=str(debug_dir) if debug_dir else None,
        )

    summary = _run(build, run_render)
    typer.echo(summary["leaves_text"])
    _echo(summary)


@app.command("compare")
def compare(
    ctx: typer.Context,
    field_a: Path = typer.Option(..., "--field-a", help="Left scalar field (CSV or 'rows cols' grid)"),
    field_b: Path = typer.Option(..., "--field-b", help="Right scalar field"),
    output: Path = typer.Option(..., "--output", "-o", help="SVG output path"),
    persistence: Optional[float] = typer.Option(None, "--persistence", min=0.0, help="Simplification threshold"),
    stats: Optional[Path] = typer.Option(None, "--stats", help="Write run statistics JSON"),
    grid_fraction: Optional[int] = typer.Option(None, "--grid-fraction", min=1),
    colors: Optional[int] = typer.Option(None, "--colors", min=3),
    connectivity: Optional[int] = typer.Option(None, "--connectivity", help="4 or 8"),
    curve: Optional[str] = typer.Option(None, "--curve", help="hilbert or morton"),
    debug_dir: Optional[Path] = typer.Option(None, "--debug-dir"),
) -> None:
    """Build merge trees from two fields, interleave them and draw the result."""

    def build() -> RunConfig:
        cfg = with_overrides(
            _load(ctx),
            grid_fraction=grid_fraction,
            colors=colors,
            persistence=persistence,
            connectivity=connectivity,
            curve=curve.lower() if curve else None,
        )
        return RunConfig(
            "compare",
            (str(field_a), str(field_b)),
            str(output),
            cfg,
            stats=str(stats) if stats else None,
            debug_dir=str(debug_dir) if debug_dir else None,
        )

    summary = _run(build, run_compare)
    typer.echo(summary["leaves_text"])
    _echo(summary)


@app.command("validate")
def validate(
    ctx: typer.Context,
    files: List[Path] = typer.Argument(..., help="Tree and interleaving JSON files"),
) -> None:
    """Run every validator; interleavings are checked against the first two trees."""

    def build() -> RunConfig:
        return RunConfig("validate", tuple(str(f) for f in files), None, _load(ctx))

    report = _run(build, run_validate)
    _echo(report)
    if not report["ok"]:
        for f in report["files"]:
            for v in f["violations"]:
                typer.echo(f"{f['path']}: [{v['rule']}] {v['subject']}: {v['message']}", err=True)
        raise typer.Exit(code=1)


def main() -> None:
    app()
