from __future__ import annotations

import json
import logging
from pathlib import Path

import pytest
from typer.testing import CliRunner

from conftest import DATA
from parkview.cli import app

ROOT = Path(__file__).resolve().parents[1]
runner = CliRunner()


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    # 不读仓库里的 config.yaml；用完把 CLI 装的 handler 摘掉
    monkeypatch.chdir(tmp_path)
    root = logging.getLogger()
    level = root.level
    yield
    for h in list(root.handlers):
        if getattr(h, "_parkview", False):
            root.removeHandler(h)
    root.setLevel(level)


def _json(output: str):
    # stderr 的违规行可能跟在 JSON 后面
    return json.JSONDecoder().raw_decode(output, output.index("{"))[0]


def _render_args(out: Path, inter: Path = DATA / "two_to_one.interleaving.json"):
    return [
        "render",
        "--tree-a",
        str(DATA / "two_leaf.json"),
        "--tree-b",
        str(DATA / "one_leaf.json"),
        "--interleaving",
        str(inter),
        "-o",
        str(out),
    ]


def test_version():
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert "parkview" in result.output


def test_render(tmp_path):
    out = tmp_path / "out.svg"
    result = runner.invoke(app, _render_args(out))
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[0] == "2 leaves left, 1 leaves right"
    summary = _json(result.output)
    assert summary["delta"] == 3.0
    assert summary["hedges"] == {"left": 1, "right": 1}
    assert summary["grid_lines"] == 4
    assert b"<svg" in out.read_bytes()


def test_render_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert runner.invoke(app, _render_args(a)).exit_code == 0
    assert runner.invoke(app, _render_args(b)).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_render_debug_dir(tmp_path):
    dbg = tmp_path / "dbg"
    result = runner.invoke(app, _render_args(tmp_path / "o.svg") + ["--debug-dir", str(dbg)])
    assert result.exit_code == 0, result.output
    names = sorted(p.name for p in dbg.iterdir())
    assert names == ["decomposition_alpha.json", "decomposition_beta.json", "interleaving.json", "scene.json"]
    scene = json.loads((dbg / "scene.json").read_text(encoding="utf-8"))
    assert scene["grid"] == [0.0, 3.0, 6.0, 9.0]


def test_render_rejects_invalid_interleaving(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(
        json.dumps(
            {
                "delta": 0.5,
                "alpha": {"a": {"edge": "c", "height": 0.5}, "b": {"edge": "c", "height": 1.5}},
                "beta": {"c": {"edge": "a", "height": 0.5}},
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "o.svg"
    result = runner.invoke(app, _render_args(out, bad))
    assert result.exit_code == 1
    assert "round-trip" in result.output
    assert not out.exists()


def test_render_io_and_parse_errors(tmp_path):
    result = runner.invoke(app, _render_args(tmp_path / "o.svg", tmp_path / "missing.json"))
    assert result.exit_code == 2

    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    result = runner.invoke(app, _render_args(tmp_path / "o.svg", broken))
    assert result.exit_code == 2
    assert "invalid JSON" in result.output


def test_render_grid_fraction_override(tmp_path):
    result = runner.invoke(app, _render_args(tmp_path / "o.svg") + ["--grid-fraction", "3"])
    assert result.exit_code == 0, result.output
    assert _json(result.output)["grid_lines"] == 8


def test_colors_below_three_is_a_usage_error(tmp_path):
    result = runner.invoke(app, _render_args(tmp_path / "o.svg") + ["--colors", "2"])
    assert result.exit_code == 2


def test_compare_with_stats(tmp_path):
    stats = tmp_path / "stats.json"
    dbg = tmp_path / "dbg"
    result = runner.invoke(
        app,
        [
            "--config",
            str(ROOT / "config.example.yaml"),
            "compare",
            "--field-a",
            str(DATA / "field_a.csv"),
            "--field-b",
            str(DATA / "field_b.txt"),
            "-o",
            str(tmp_path / "cmp.svg"),
            "--stats",
            str(stats),
            "--debug-dir",
            str(dbg),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "4 leaves left, 4 leaves right" in result.output.splitlines()
    data = json.loads(stats.read_text(encoding="utf-8"))
    assert data["leaves"] == {"left": 4, "right": 4}
    assert data["delta"] >= data["frechet"] > 0
    assert set(data["branch_components"]) == {"alpha", "beta"}
    assert (dbg / "tree_a.json").exists() and (dbg / "tree_b.json").exists()
    assert (tmp_path / "cmp.svg").exists()


def test_compare_bad_field(tmp_path):
    bad = tmp_path / "f.txt"
    bad.write_text("2 2\n0 1\n", encoding="utf-8")
    result = runner.invoke(
        app,
        ["compare", "--field-a", str(bad), "--field-b", str(DATA / "field_b.txt"), "-o", str(tmp_path / "x.svg")],
    )
    assert result.exit_code == 2
    assert "header says" in result.output


def test_validate_ok():
    result = runner.invoke(
        app,
        [
            "validate",
            str(DATA / "two_leaf.json"),
            str(DATA / "one_leaf.json"),
            str(DATA / "two_to_one.interleaving.json"),
        ],
    )
    assert result.exit_code == 0, result.output
    report = _json(result.output)
    assert report["ok"] is True
    assert [f["kind"] for f in report["files"]] == ["tree", "tree", "interleaving"]


def test_validate_reports_bad_tree(tmp_path):
    bad = tmp_path / "t.json"
    bad.write_text(
        json.dumps({"root": "r", "nodes": {"r": {"height": 0, "children": ["a", "b"]}, "a": {"height": 0}, "b": {"height": 1}}}),
        encoding="utf-8",
    )
    result = runner.invoke(app, ["validate", str(bad)])
    assert result.exit_code == 1
    assert "[strict]" in result.output


def test_validate_interleaving_without_trees():
    result = runner.invoke(app, ["validate", str(DATA / "two_to_one.interleaving.json")])
    assert result.exit_code == 1
    assert "[trees]" in result.output


def test_validate_unknown_file(tmp_path):
    other = tmp_path / "x.json"
    other.write_text("[1, 2]", encoding="utf-8")
    result = runner.invoke(app, ["validate", str(other)])
    assert result.exit_code == 2


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("layout:\n  colors: 1\n", encoding="utf-8")
    result = runner.invoke(app, ["--config", str(cfg)] + _render_args(tmp_path / "o.svg"))
    assert result.exit_code == 2


def test_validate_records_interleaving_parse_error(tmp_path):
    # 像缺 height：记成该文件的 [parse] 违规，其它文件照常校验
    bad = tmp_path / "i.json"
    bad.write_text(json.dumps({"delta": 3, "alpha": {"a": {"edge": "c"}}, "beta": {}}), encoding="utf-8")
    result = runner.invoke(app, ["validate", str(DATA / "two_leaf.json"), str(DATA / "one_leaf.json"), str(bad)])
    assert result.exit_code == 1
    assert "[parse]" in result.output
    report = _json(result.output)
    assert [f["ok"] for f in report["files"]] == [True, True, False]
    assert report["files"][2]["violations"][0]["rule"] == "parse"


def test_validate_records_tree_parse_error(tmp_path):
    bad = tmp_path / "t.json"
    bad.write_text(json.dumps({"root": "r", "nodes": {"r": {"height": 1, "children": ["zz"]}}}), encoding="utf-8")
    result = runner.invoke(app, ["validate", str(bad), str(DATA / "one_leaf.json")])
    assert result.exit_code == 1
    assert "[parse]" in result.output
    assert "unknown child" in result.output
    report = _json(result.output)
    assert [f["ok"] for f in report["files"]] == [False, True]
