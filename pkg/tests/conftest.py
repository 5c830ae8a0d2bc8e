import json
import shutil
import sys
from pathlib import Path

import pytest
from shapely.geometry import box

from fewseval.ingest import Feature, RawLayer

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

FIXTURES = HERE / "fixtures"
SYNTHETIC = FIXTURES / "synthetic"
GOLDEN = FIXTURES / "golden"


def layer(*items, path="<memory>"):
    """RawLayer from (bbox or geometry, attributes) pairs."""
    feats = []
    for g, attrs in items:
        if isinstance(g, tuple):
            g = box(*g)
        feats.append(Feature(g, {k: str(v) for k, v in attrs.items()}))
    return RawLayer(tuple(feats), path)


def feature_collection(*items):
    return {
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature", "properties": props, "geometry": geometry} for geometry, props in items
        ],
    }


def square(x0=0.0, y0=0.0, x1=1.0, y1=1.0):
    return {"type": "Polygon", "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]}


def write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def synthetic_tree(tmp_path):
    """A private copy of the checked-in synthetic fixture tree."""
    dest = tmp_path / "synthetic"
    shutil.copytree(SYNTHETIC, dest)
    return dest


def report_values(rep):
    """A MetricsReport flattened to the key names used by the brute-force oracle."""
    out = {"n": rep.n, "accuracy": rep.accuracy}
    for k, v in rep.within_band.items():
        out[f"within_{k}"] = v
    for c in range(1, 6):
        out[f"precision_{c}"] = rep.precision[c - 1]
        out[f"recall_{c}"] = rep.recall[c - 1]
        out[f"f1_{c}"] = rep.f1[c - 1]
    m = rep.macro
    out.update(
        macro_precision=m.precision, macro_recall=m.recall, macro_f1=m.f1, macro_classes=m.classes,
        macro_precision_skipped=m.skipped_precision, macro_f1_skipped=m.skipped_f1,
    )
    b = rep.crisis
    out.update(
        crisis_tp=b.tp, crisis_fp=b.fp, crisis_fn=b.fn, crisis_tn=b.tn,
        crisis_precision=b.precision, crisis_recall=b.recall, crisis_f1=b.f1, crisis_accuracy=b.accuracy,
    )
    return out


def oracle_values(expected):
    """Oracle output with Fractions converted once, for exact float comparison."""
    return {k: (None if v is None else (v if isinstance(v, int) else float(v))) for k, v in expected.items()}
