from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .config import Config, RunConfig
from .decomposition import PathBranchDecomposition, decomposition_dump, path_branch_decomposition
from .errors import InterleavingValidationError, TreeParseError
from .fields import read_field
from .interleaving import Branch, Interleaving, read_interleaving, validate_interleaving, write_interleaving
from .layout import Scene, build_scene, scene_dump
from .mergetree import OrderedMergeTree, read_tree, tree_from_dict, validate_tree, write_tree
from .pipeline import compare_fields
from .render import render_svg

logger = logging.getLogger(__name__)


def _fmt(x: float, nd: int = 6) -> str:
    return f"{float(x):.{nd}g}"


def _write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _draw(i: Interleaving, cfg: Config) -> Tuple[PathBranchDecomposition, Scene, bytes]:
    """第 1-4 步：分解 -> 布局 -> 着色 -> SVG。"""
    pbd = path_branch_decomposition(i)
    scene = build_scene(i, pbd, cfg.layout)
    svg = render_svg(scene, cfg.render, cfg.layout)
    return pbd, scene, svg


def _summary(i: Interleaving, pbd: PathBranchDecomposition, scene: Scene) -> Dict[str, Any]:
    nl, nr = len(i.alpha.source.leaves), len(i.alpha.target.leaves)

    def side(branches: Sequence[Branch]) -> Dict[str, int]:
        sizes = [b.size for b in branches]
        return {"total": sum(sizes), "max": max(sizes, default=0)}

    return {
        "delta": i.delta,
        "leaves": {"left": nl, "right": nr},
        "leaves_text": f"{nl} leaves left, {nr} leaves right",
        "active_paths": {"left": len(scene.left.glyphs), "right": len(scene.right.glyphs)},
        "hedges": {"left": len(scene.left.hedges), "right": len(scene.right.hedges)},
        "colors_used": {
            "left": len({h.color for h in scene.left.hedges}),
            "right": len({h.color for h in scene.right.hedges}),
        },
        "branch_components": {"alpha": side(pbd.alpha_branches), "beta": side(pbd.beta_branches)},
        "grid_lines": len(scene.grid),
    }


def _dump_debug(dirname: str, i: Interleaving, pbd: PathBranchDecomposition, scene: Scene) -> None:
    d = Path(dirname)
    _write_json(d / "decomposition_alpha.json", decomposition_dump(i.alpha, pbd.alpha_paths))
    _write_json(d / "decomposition_beta.json", decomposition_dump(i.beta, pbd.beta_paths))
    _write_json(d / "scene.json", scene_dump(scene))
    (d / "interleaving.json").write_bytes(write_interleaving(i))
    logger.info("debug dumps written to %s", d)


def _write_svg(path: str, svg: bytes) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(svg)


def run_render(rc: RunConfig) -> Dict[str, Any]:
    """读两棵树和 interleaving -> 校验 -> 画图。"""
    tree_a_path, tree_b_path, inter_path = rc.inputs
    ta = read_tree(Path(tree_a_path).read_bytes())
    tb = read_tree(Path(tree_b_path).read_bytes())
    i = read_interleaving(Path(inter_path).read_bytes(), ta, tb)

    violations = validate_interleaving(i)
    if violations:
        raise InterleavingValidationError(f"{inter_path}: invalid interleaving", violations)

    pbd, scene, svg = _draw(i, rc.config)
    _write_svg(rc.output or "", svg)
    if rc.debug_dir:
        _dump_debug(rc.debug_dir, i, pbd, scene)

    summary = {"command": "render", **_summary(i, pbd, scene), "output": rc.output}
    logger.info("render: delta=%s, %s", _fmt(i.delta), summary["leaves_text"])
    return summary


def run_compare(rc: RunConfig) -> Dict[str, Any]:
    """两个标量场 -> 合并树 -> Fréchet -> interleaving -> 画图；可选 stats JSON。"""
    field_a, field_b = (read_field(Path(p)) for p in rc.inputs)
    cmp = compare_fields(field_a, field_b, rc.config.pipeline)

    pbd, scene, svg = _draw(cmp.interleaving, rc.config)
    _write_svg(rc.output or "", svg)
    if rc.debug_dir:
        _dump_debug(rc.debug_dir, cmp.interleaving, pbd, scene)
        d = Path(rc.debug_dir)
        (d / "tree_a.json").write_bytes(write_tree(cmp.tree_a))
        (d / "tree_b.json").write_bytes(write_tree(cmp.tree_b))

    summary = {
        "command": "compare",
        "frechet": cmp.frechet,
        **_summary(cmp.interleaving, pbd, scene),
        "persistence": rc.config.pipeline.persistence,
        "output": rc.output,
    }
    if rc.stats:
        _write_json(Path(rc.stats), summary)
        summary["stats"] = rc.stats
    logger.info("compare: frechet=%s delta=%s, %s", _fmt(cmp.frechet), _fmt(cmp.delta), summary["leaves_text"])
    return summary


def _classify(raw: Any) -> Optional[str]:
    if isinstance(raw, dict) and "root" in raw:
        return "tree"
    if isinstance(raw, dict) and "delta" in raw:
        return "interleaving"
    return None


def _parse_violation(path: str, e: TreeParseError) -> Dict[str, str]:
    return {"rule": "parse", "subject": path, "message": str(e)}


def run_validate(rc: RunConfig) -> Dict[str, Any]:
    """按键名区分文件：含 root 的是树，含 delta 的是 interleaving（对照前两棵树检查）。"""
    files: List[Dict[str, Any]] = []
    trees: List[Tuple[Optional[OrderedMergeTree], bool]] = []
    pending: List[Tuple[int, str, bytes]] = []

    for path in rc.inputs:
        data = Path(path).read_bytes()
        try:
            raw = json.loads(data)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise TreeParseError(f"{path}: invalid JSON: {e}") from e
        kind = _classify(raw)
        if kind is None:
            raise TreeParseError(f"{path}: neither a tree (root) nor an interleaving (delta)")
        entry: Dict[str, Any] = {"path": path, "kind": kind}
        files.append(entry)
        if kind == "tree":
            try:
                t = tree_from_dict(raw)
            except TreeParseError as e:
                entry["ok"] = False
                entry["violations"] = [_parse_violation(path, e)]
                trees.append((None, False))
                continue
            vs = validate_tree(t)
            entry["ok"] = not vs
            entry["violations"] = [v.as_dict() for v in vs]
            trees.append((t, not vs))
        else:
            pending.append((len(files) - 1, path, data))

    for idx, path, data in pending:
        entry = files[idx]
        if len(trees) < 2 or not (trees[0][1] and trees[1][1]):
            entry["ok"] = False
            entry["violations"] = [
                {"rule": "trees", "subject": path, "message": "the first two tree files must be present and valid"}
            ]
            continue
        try:
            i = read_interleaving(data, trees[0][0], trees[1][0])  # type: ignore[arg-type]
        except TreeParseError as e:
            entry["ok"] = False
            entry["violations"] = [_parse_violation(path, e)]
            continue
        vs = validate_interleaving(i)
        entry["ok"] = not vs
        entry["violations"] = [v.as_dict() for v in vs]

    report = {"ok": all(f["ok"] for f in files), "files": files}
    logger.info("validate: %d files, ok=%s", len(files), report["ok"])
    return report
