"""Stages behind the command-line tool.

Each stage reads only the config and files written by earlier stages into
``output_dir``:

``catalog``  -> catalog.csv
``build``    -> atoms.geojson, panel.csv, panel.jsonl, manifest.build.json
``evaluate`` -> predictions.csv/.jsonl, reports.csv/.json, plot_*.csv, manifest.evaluate.json
``report``   -> report.md (re-rendered from reports.json)
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import logging
import warnings
from collections import Counter
from pathlib import Path

from . import __version__
from .atoms import Panel, build_atoms, build_panel, write_atoms
from .baselines import PredictionSource, predict_all, write_predictions_csv, write_predictions_jsonl
from .config import RunConfig
from .errors import FewsEvalError
from .ingest import CatalogEntry, build_catalog, load_layer
from .metrics import score
from .periods import LayerKind, PeriodId
from .report import (
    accuracy_over_time_csv,
    confusion_long_csv,
    country_period_csv,
    render_markdown,
    reports_csv,
    reports_json,
)

log = logging.getLogger(__name__)

CATALOG_FILE = "catalog.csv"
CATALOG_COLUMNS = ("period", "kind", "report_region", "path")
SIDECARS = (".shp", ".shx", ".dbf", ".prj", ".cpg")


class StageError(FewsEvalError):
    """A stage is missing the output of an earlier stage."""


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _layer_files(path: Path) -> list[Path]:
    if path.suffix.lower() == ".shp":
        return [p for p in (path.with_suffix(s) for s in SIDECARS) if p.exists()]
    return [path]


def manifest_digest(doc: dict) -> str:
    """Digest of a manifest with its timestamp removed."""
    body = {k: v for k, v in doc.items() if k != "created_at"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0).isoformat()


def _write_manifest(path: Path, stage: str, cfg: RunConfig, **body) -> dict:
    doc = {
        "tool": "fewseval",
        "version": __version__,
        "stage": stage,
        "created_at": _now(),
        "config": cfg.snapshot(),
        **body,
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n", encoding="utf-8")
    return doc


# -- catalog ----------------------------------------------------------------

def run_catalog(cfg: RunConfig) -> tuple[list[CatalogEntry], list]:
    """Scan the data root and write catalog.csv. Returns entries and naming problems."""
    if not cfg.data_root.is_dir():
        raise StageError(f"data root {cfg.data_root} is not a directory")
    problems: list = []
    entries = build_catalog(cfg.data_root, problems)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.output_dir / CATALOG_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CATALOG_COLUMNS)
        for e in entries:
            w.writerow([str(e.period), e.kind.value, e.report_region, Path(e.path).as_posix()])
    return entries, problems


def read_catalog(path) -> list[CatalogEntry]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            CatalogEntry(PeriodId.parse(r["period"]), LayerKind(r["kind"]), r["report_region"], r["path"])
            for r in csv.DictReader(fh)
        ]


# -- build ------------------------------------------------------------------

def _country_regions(panel: Panel, atom_regions: dict) -> dict[str, str]:
    tally: dict[str, Counter] = {}
    for aid, regions in atom_regions.items():
        country = panel.atoms[aid].country
        tally.setdefault(country, Counter()).update(regions)
    return {c: sorted(t.items(), key=lambda kv: (-kv[1], kv[0]))[0][0] for c, t in sorted(tally.items())}


def run_build(cfg: RunConfig) -> dict:
    """Build atoms and the classification panel; returns the manifest."""
    out = cfg.output_dir
    catalog_path = out / CATALOG_FILE
    if not catalog_path.exists():
        raise StageError(f"{catalog_path} not found; run the catalog stage first")
    if cfg.admin_path is None or cfg.livelihood_path is None:
        raise StageError("config needs base_layers.admin and base_layers.livelihood")
    for p in (cfg.admin_path, cfg.livelihood_path):
        if not p.exists():
            raise StageError(f"base layer {p} not found")
    catalog = [e for e in read_catalog(catalog_path) if cfg.in_range(e.period)]
    if not catalog:
        raise StageError("catalog has no layer inside the configured period range")

    inputs = {}
    for p in (cfg.admin_path, cfg.livelihood_path):
        for f in _layer_files(p):
            inputs[f.name if f.parent == p.parent else str(f)] = sha256(f)
    for e in catalog:
        for f in _layer_files(cfg.data_root / e.path):
            inputs[f.relative_to(cfg.data_root).as_posix()] = sha256(f)

    atom_stats: dict = {}
    atoms = build_atoms(
        load_layer(cfg.admin_path),
        load_layer(cfg.livelihood_path),
        cfg.admin_fields,
        cfg.livelihood_fields,
        cfg.area_threshold,
        atom_stats,
    )
    tables: list = []
    atom_regions: dict = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        panel = build_panel(
            catalog,
            atoms,
            root=cfg.data_root,
            attribute_for=cfg.ipc_attribute,
            sentinels=cfg.sentinels,
            area_threshold=cfg.area_threshold,
            coverage_threshold=cfg.coverage_threshold,
            filter_each_overlay=cfg.filter_each_overlay,
            stats=tables,
            workers=cfg.workers,
            atom_regions=atom_regions,
        )
    notes = [str(w.message) for w in caught]
    for msg in notes:
        log.warning(msg)

    out.mkdir(parents=True, exist_ok=True)
    write_atoms(atoms, out / "atoms.geojson", as_of=cfg.as_of)
    panel.to_csv(out / "panel.csv")
    panel.to_jsonl(out / "panel.jsonl")
    outputs = {name: sha256(out / name) for name in ("atoms.geojson", "panel.csv", "panel.jsonl")}
    return _write_manifest(
        out / "manifest.build.json",
        "build",
        cfg,
        as_of=cfg.as_of,
        inputs=inputs,
        atoms=atom_stats,
        tables=[t for t in tables if "kind" in t],
        panel_rows=len(panel),
        country_regions=_country_regions(panel, atom_regions),
        warnings=notes,
        outputs=outputs,
    )


# -- evaluate ---------------------------------------------------------------

def _targets(panel: Panel, cfg: RunConfig, lead: int) -> list[PeriodId]:
    have = set(panel.periods())
    out = []
    for t in sorted(have):
        if not cfg.in_range(t):
            continue
        try:
            issue = t.shift(-lead)
        except ValueError:
            continue
        if issue in have:
            out.append(t)
    return out


def run_evaluate(cfg: RunConfig) -> dict:
    """Score every configured source; returns the manifest.

    Raises :class:`~fewseval.errors.EmptyJoinError` when nothing can be scored.
    """
    out = cfg.output_dir
    panel_path = out / "panel.csv"
    if not panel_path.exists():
        raise StageError(f"{panel_path} not found; run the build stage first")
    panel = Panel.read_csv(panel_path)
    region_of = {}
    build_manifest = out / "manifest.build.json"
    if build_manifest.exists():
        region_of = json.loads(build_manifest.read_text(encoding="utf-8")).get("country_regions", {})

    counts: Counter = Counter()
    predictions = predict_all(panel, cfg.sources, _targets(panel, cfg, 1), LayerKind.ML1, counts)
    write_predictions_csv(predictions, out / "predictions.csv")
    write_predictions_jsonl(predictions, out / "predictions.jsonl")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        reports = score(predictions, panel, cfg.groupings, region_of, cfg.sources)
    notes = [str(w.message) for w in caught]
    for msg in notes:
        log.warning(msg)

    periods = [str(p) for p in panel.periods()]
    sources = [s.value for s in cfg.sources]
    reports_csv(reports, out / "reports.csv")
    reports_json(reports, out / "reports.json", panel_periods=periods, sources=sources)
    accuracy_over_time_csv(reports, out / "plot_accuracy_over_time.csv")
    country_period_csv(reports, out / "plot_country_period.csv")
    confusion_long_csv(reports, out / "plot_confusion_by_period.csv")
    written = [
        "predictions.csv", "predictions.jsonl", "reports.csv", "reports.json",
        "plot_accuracy_over_time.csv", "plot_country_period.csv", "plot_confusion_by_period.csv",
    ]

    if cfg.score_ml2:
        ml2 = predict_all(panel, [PredictionSource.FEWSNET], _targets(panel, cfg, 2), LayerKind.ML2)
        write_predictions_csv(ml2, out / "predictions_ml2.csv")
        ml2_reports = score(ml2, panel, [g for g in cfg.groupings if "source" in g] or [("source",)], region_of)
        reports_csv(ml2_reports, out / "reports_ml2.csv")
        reports_json(ml2_reports, out / "reports_ml2.json", panel_periods=periods, sources=["FEWSNET"], horizon="ML2")
        written += ["predictions_ml2.csv", "reports_ml2.csv", "reports_ml2.json"]

    by_source = Counter(p.source.value for p in predictions)
    return _write_manifest(
        out / "manifest.evaluate.json",
        "evaluate",
        cfg,
        inputs={"panel.csv": sha256(panel_path)},
        predictions={s: by_source.get(s, 0) for s in sources},
        dropped=dict(sorted(counts.items())),
        reports=len(reports),
        warnings=notes,
        outputs={name: sha256(out / name) for name in written},
    )


def run_report(cfg: RunConfig) -> str:
    path = cfg.output_dir / "reports.json"
    if not path.exists():
        raise StageError(f"{path} not found; run the evaluate stage first")
    text = render_markdown(json.loads(path.read_text(encoding="utf-8")))
    (cfg.output_dir / "report.md").write_text(text, encoding="utf-8")
    return text


def run_all(cfg: RunConfig) -> dict:
    run_catalog(cfg)
    build = run_build(cfg)
    evaluate = run_evaluate(cfg)
    run_report(cfg)
    return {"build": build, "evaluate": evaluate}
