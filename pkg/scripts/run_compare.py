import json
import sys
from pathlib import Path

# Allow running without installing the package
ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from parkview.config import RunConfig, load_config
from parkview.runner import run_compare

if __name__ == "__main__":
    cfg = load_config("config.yaml")
    out = Path(cfg.output_dir)
    rc = RunConfig(
        "compare",
        (str(out / "field_a.csv"), str(out / "field_b.txt")),
        str(out / "compare.svg"),
        cfg,
        stats=str(out / "compare_stats.json"),
    )
    summary = run_compare(rc)
    print(json.dumps(summary, ensure_ascii=False, indent=2))
