"""Run the four stages on the bundled fixture and print the report."""

import shutil
import tempfile
from pathlib import Path

from fewseval.config import load_config
from fewseval.pipeline import run_all

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "synthetic"

with tempfile.TemporaryDirectory() as tmp:
    tree = Path(tmp) / "synthetic"
    shutil.copytree(FIXTURE, tree)
    cfg = load_config(tree / "config.json")
    result = run_all(cfg)
    print("panel rows", result["build"]["panel_rows"])
    print("predictions", result["evaluate"]["predictions"])
    print("\n".join((cfg.output_dir / "report.md").read_text().splitlines()[:12]))
    print(sorted(p.name for p in cfg.output_dir.iterdir()))
