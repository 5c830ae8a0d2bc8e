"""Run configuration: one JSON file, optionally overridden from the command line.

Example::

    {
      "data_root": "data/fs",
      "output_dir": "out",
      "base_layers": {
        "admin": "data/base/admin.shp",
        "livelihood": "data/base/lhz.shp",
        "as_of": "2023-09",
        "admin_fields": {"id": "FNID", "name": "ADMIN2", "country": "COUNTRY"},
        "livelihood_fields": {"id": "FNID", "name": "LZNAMEEN"}
      },
      "ipc_attribute": {"default": "{kind}", "by_year": [{"from": 2016, "to": 2017, "name": "{kind}_IPC"}]},
      "sentinels": [0, 66, 88, 99],
      "area_threshold": 0.005,
      "coverage_threshold": 0.5,
      "filter_each_overlay": true,
      "sources": ["FEWSNET", "PPS", "SPLY", "Max2PP"],
      "groupings": [["source"], ["source", "period"], ["source", "country"], ["source", "country", "period"]],
      "periods": "2016-02..2022-10",
      "score_ml2": false
    }

Relative paths are resolved against the directory holding the config file.
``FEWSEVAL_DATA_ROOT`` overrides ``data_root``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .atoms import ADMIN_FIELDS, COVERAGE_THRESHOLD, LIVELIHOOD_FIELDS, FieldMap
from .baselines import PredictionSource
from .geom import AREA_THRESHOLD
from .ingest import DEFAULT_SENTINELS
from .metrics import DEFAULT_GROUPINGS, DIMENSIONS
from .periods import LayerKind, PeriodId, parse_period_range

DATA_ROOT_ENV = "FEWSEVAL_DATA_ROOT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class IpcAttribute:
    """Attribute holding the IPC class; ``{kind}`` expands to CS/ML1/ML2."""

    default: str = "{kind}"
    by_year: tuple[tuple[int, int, str], ...] = ()

    def __call__(self, period: PeriodId, kind: LayerKind) -> str:
        template = self.default
        for lo, hi, name in self.by_year:
            if lo <= period.year <= hi:
                template = name
                break
        return template.format(kind=kind.value)


@dataclass(frozen=True)
class RunConfig:
    data_root: Path
    output_dir: Path
    admin_path: Path | None = None
    livelihood_path: Path | None = None
    as_of: str | None = None
    admin_fields: FieldMap = ADMIN_FIELDS
    livelihood_fields: FieldMap = LIVELIHOOD_FIELDS
    ipc_attribute: IpcAttribute = field(default_factory=IpcAttribute)
    sentinels: frozenset = DEFAULT_SENTINELS
    area_threshold: float = AREA_THRESHOLD
    coverage_threshold: float = COVERAGE_THRESHOLD
    filter_each_overlay: bool = True
    sources: tuple[PredictionSource, ...] = tuple(PredictionSource)
    groupings: tuple[tuple[str, ...], ...] = DEFAULT_GROUPINGS
    periods: tuple[PeriodId, PeriodId] | None = None
    score_ml2: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.area_threshold > 0 or not self.coverage_threshold > 0:
            raise ConfigError("thresholds must be positive")
        if self.coverage_threshold > 1:
            raise ConfigError("coverage_threshold is a fraction in (0, 1]")
        for g in self.groupings:
            bad = [d for d in g if d not in DIMENSIONS]
            if bad:
                raise ConfigError(f"unknown grouping dimension(s) {bad}")
        if not self.sources:
            raise ConfigError("no sources selected")

    def in_range(self, period: PeriodId) -> bool:
        return self.periods is None or self.periods[0] <= period <= self.periods[1]

    def snapshot(self) -> dict:
        """JSON-ready view, for manifests."""
        return {
            "data_root": str(self.data_root),
            "output_dir": str(self.output_dir),
            "admin_path": None if self.admin_path is None else str(self.admin_path),
            "livelihood_path": None if self.livelihood_path is None else str(self.livelihood_path),
            "as_of": self.as_of,
            "admin_fields": asdict(self.admin_fields),
            "livelihood_fields": asdict(self.livelihood_fields),
            "ipc_attribute": {"default": self.ipc_attribute.default, "by_year": [list(b) for b in self.ipc_attribute.by_year]},
            "sentinels": sorted(self.sentinels),
            "area_threshold": self.area_threshold,
            "coverage_threshold": self.coverage_threshold,
            "filter_each_overlay": self.filter_each_overlay,
            "sources": [s.value for s in self.sources],
            "groupings": [list(g) for g in self.groupings],
            "periods": None if self.periods is None else f"{self.periods[0]}..{self.periods[1]}",
            "score_ml2": self.score_ml2,
        }


def parse_sources(items) -> tuple[PredictionSource, ...]:
    if isinstance(items, str):
        items = [s for s in items.split(",") if s.strip()]
    lookup = {s.value.lower(): s for s in PredictionSource}
    out = []
    for s in items:
        key = str(s).strip().lower().replace("-", "")
        if key not in lookup:
            raise ConfigError(f"unknown source {s!r}; choose from {[x.value for x in PredictionSource]}")
        if lookup[key] not in out:
            out.append(lookup[key])
    return tuple(out)


def _fields(doc: dict | None, default: FieldMap) -> FieldMap:
    if not doc:
        return default
    return FieldMap(id=doc.get("id", default.id), name=doc.get("name", default.name), country=doc.get("country", default.country))


def load_config(path=None, **overrides) -> RunConfig:
    """Read a config file (or start empty) and apply keyword overrides.

    Overrides use :class:`RunConfig` field names; ``None`` values are ignored.
    """
    doc: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.resolve().parent

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else base / p

    layers = doc.get("base_layers") or {}
    ipc = doc.get("ipc_attribute") or {}
    if isinstance(ipc, str):
        ipc = {"default": ipc}
    by_year = tuple((int(b["from"]), int(b["to"]), str(b["name"])) for b in ipc.get("by_year", ()))
    try:
        periods = parse_period_range(doc["periods"]) if doc.get("periods") else None
        cfg = RunConfig(
            data_root=resolve(doc.get("data_root", ".")),
            output_dir=resolve(doc.get("output_dir", "out")),
            admin_path=resolve(layers.get("admin")),
            livelihood_path=resolve(layers.get("livelihood")),
            as_of=layers.get("as_of"),
            admin_fields=_fields(layers.get("admin_fields"), ADMIN_FIELDS),
            livelihood_fields=_fields(layers.get("livelihood_fields"), LIVELIHOOD_FIELDS),
            ipc_attribute=IpcAttribute(ipc.get("default", "{kind}"), by_year),
            sentinels=frozenset(int(s) for s in doc.get("sentinels", DEFAULT_SENTINELS)),
            area_threshold=float(doc.get("area_threshold", AREA_THRESHOLD)),
            coverage_threshold=float(doc.get("coverage_threshold", COVERAGE_THRESHOLD)),
            filter_each_overlay=bool(doc.get("filter_each_overlay", True)),
            sources=parse_sources(doc.get("sources", [s.value for s in PredictionSource])),
            groupings=tuple(tuple(g) for g in doc.get("groupings", DEFAULT_GROUPINGS)),
            periods=periods,
            score_ml2=bool(doc.get("score_ml2", False)),
            workers=int(doc.get("workers", 1)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config: {exc}") from exc

    env_root = os.environ.get(DATA_ROOT_ENV)
    if env_root:
        cfg = replace(cfg, data_root=Path(env_root))
    changes = {k: v for k, v in overrides.items() if v is not None}
    if "sources" in changes:
        changes["sources"] = parse_sources(changes["sources"])
    if "periods" in changes and isinstance(changes["periods"], str):
        try:
            changes["periods"] = parse_period_range(changes["periods"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    for k in ("data_root", "output_dir"):
        if k in changes:
            changes[k] = Path(changes[k])
    return replace(cfg, **changes) if changes else cfg
