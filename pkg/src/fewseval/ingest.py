"""Reading classification and boundary layers from disk.

Two vector formats are supported: ESRI shapefile sidecar sets
(``.shp/.shx/.dbf`` plus optional ``.prj``/``.cpg``) and GeoJSON. All geometry
is taken as geographic lon/lat; a layer that declares a projected CRS is
rejected instead of being reprojected.
"""

from __future__ import annotations

import datetime
import json
import logging
import math
import os
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import shapefile
from shapely.geometry import mapping, shape

from .errors import (
    CrsError,
    DuplicateEntryError,
    EmptyLayerError,
    FormatError,
    MissingAttributeError,
    NamingError,
    RangeError,
)
from .geom import Region, normalize
from .periods import IPC_CLASSES, LayerKind, PeriodId

log = logging.getLogger(__name__)

WGS84 = "EPSG:4326"

# No-data / not-analysed codes seen in published classification layers
# (66 water bodies, 88 parks and reserves, 99 no data, 0 not mapped).
DEFAULT_SENTINELS = frozenset({0, 66, 88, 99})

LAYER_SUFFIXES = {".shp": "esri-shapefile", ".geojson": "geojson", ".json": "geojson"}
SIDECAR_SUFFIXES = {".shx", ".dbf", ".prj", ".cpg", ".sbn", ".sbx", ".xml", ".qix", ".qmd", ".fix", ".aih", ".ain", ".atx"}
MANIFEST_NAME = "catalog_manifest.json"

_GEOGRAPHIC_CRS_NAMES = {
    "EPSG:4326",
    "URN:OGC:DEF:CRS:EPSG::4326",
    "URN:OGC:DEF:CRS:OGC:1.3:CRS84",
    "URN:OGC:DEF:CRS:OGC::CRS84",
    "OGC:CRS84",
    "CRS84",
}


@dataclass(frozen=True)
class Feature:
    geometry: Region
    attributes: Mapping[str, str]


@dataclass(frozen=True)
class RawLayer:
    features: tuple[Feature, ...]
    source_path: str
    declared_crs: str = WGS84
    # features skipped because they had no geometry
    null_geometries: int = 0

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)


@dataclass(frozen=True)
class CatalogEntry:
    period: PeriodId
    kind: LayerKind
    report_region: str
    path: str

    @property
    def key(self):
        return (self.period, self.kind, self.report_region)

    @property
    def sort_key(self):
        return (self.period, self.report_region, list(LayerKind).index(self.kind))


# -- loading ----------------------------------------------------------------

def _text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bytes):
        return value.decode("utf-8", errors="replace").strip()
    if isinstance(value, (datetime.date, datetime.datetime)):
        return value.isoformat()
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value).strip() if isinstance(value, str) else str(value)


def _polygonal(geom_mapping, where: str) -> Region | None:
    if geom_mapping is None:
        return None
    gtype = geom_mapping.get("type")
    if gtype not in ("Polygon", "MultiPolygon"):
        raise FormatError(f"{where}: unsupported geometry type {gtype!r}")
    if not _finite(geom_mapping.get("coordinates")):
        raise FormatError(f"{where}: non-finite or non-numeric coordinate")
    try:
        geom = shape(geom_mapping)
    except Exception as exc:  # shapely raises a mix of ValueError/TypeError/GEOSException
        raise FormatError(f"{where}: bad coordinates ({exc})") from exc
    if geom.is_empty:
        return None
    return normalize(geom)


def _finite(coords) -> bool:
    if isinstance(coords, (list, tuple)):
        return all(_finite(c) for c in coords)
    return isinstance(coords, (int, float)) and not isinstance(coords, bool) and math.isfinite(coords)


def _crs_from_prj(prj: Path) -> str:
    wkt = prj.read_text(encoding="utf-8", errors="replace").strip()
    head = wkt.split("[", 1)[0].strip().upper()
    if head in ("PROJCS", "PROJCRS", "PROJECTEDCRS"):
        name = re.match(r'^\w+\["([^"]*)"', wkt)
        raise CrsError(f"{prj}: projected CRS {name.group(1) if name else ''!r}; reproject to lon/lat first")
    if head in ("GEOGCS", "GEOGCRS", "GEODCRS", "GEOGRAPHICCRS"):
        name = re.match(r'^\w+\["([^"]*)"', wkt)
        return name.group(1) if name else WGS84
    raise CrsError(f"{prj}: unrecognised CRS definition")


def _load_shapefile(path: Path) -> RawLayer:
    prj = path.with_suffix(".prj")
    crs = _crs_from_prj(prj) if prj.exists() else WGS84
    cpg = path.with_suffix(".cpg")
    encoding = "utf-8"
    if cpg.exists():
        encoding = cpg.read_text(errors="replace").strip() or encoding
    try:
        reader = shapefile.Reader(str(path), encoding=encoding, encodingErrors="replace")
    except (shapefile.ShapefileException, OSError, LookupError, struct.error) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    features = []
    nulls = 0
    with reader:
        if reader.shapeType not in (shapefile.NULL, shapefile.POLYGON, shapefile.POLYGONZ, shapefile.POLYGONM):
            raise FormatError(f"{path}: shape type {reader.shapeTypeName} is not polygonal")
        names = [f[0] for f in reader.fields[1:]]
        try:
            for i, sr in enumerate(reader.iterShapeRecords()):
                if sr.shape.shapeType == shapefile.NULL or not sr.shape.points:
                    nulls += 1
                    continue
                geo = sr.shape.__geo_interface__
                geom = _polygonal({"type": geo["type"], "coordinates": geo["coordinates"]}, f"{path}#{i}")
                if geom is None:
                    nulls += 1
                    continue
                attrs = {n: _text(v) for n, v in zip(names, sr.record)}
                features.append(Feature(geom, MappingProxyType(attrs)))
        except (shapefile.ShapefileException, ValueError, IndexError, OSError, struct.error) as exc:
            raise FormatError(f"{path}: {exc}") from exc
    if not features:
        raise EmptyLayerError(f"{path}: no features")
    return RawLayer(tuple(features), str(path), crs, nulls)


def _crs_from_geojson(doc: dict, path: Path) -> str:
    crs = doc.get("crs")
    if not crs:
        return WGS84
    name = str((crs.get("properties") or {}).get("name", "")).upper()
    if name in _GEOGRAPHIC_CRS_NAMES:
        return WGS84
    raise CrsError(f"{path}: CRS {name or crs!r} is not geographic lon/lat")


def _load_geojson(path: Path) -> RawLayer:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or "type" not in doc:
        raise FormatError(f"{path}: not a GeoJSON object")
    crs = _crs_from_geojson(doc, path)
    if doc["type"] == "FeatureCollection":
        raw = doc.get("features")
        if not isinstance(raw, list):
            raise FormatError(f"{path}: FeatureCollection without a features array")
    elif doc["type"] == "Feature":
        raw = [doc]
    else:
        raw = [{"type": "Feature", "geometry": doc, "properties": {}}]
    features = []
    nulls = 0
    for i, f in enumerate(raw):
        if not isinstance(f, dict) or f.get("type") != "Feature":
            raise FormatError(f"{path}#{i}: not a Feature")
        geom = _polygonal(f.get("geometry"), f"{path}#{i}")
        if geom is None:
            nulls += 1
            continue
        props = f.get("properties") or {}
        attrs = {str(k): _text(v) for k, v in props.items()}
        features.append(Feature(geom, MappingProxyType(attrs)))
    if not features:
        raise EmptyLayerError(f"{path}: no features")
    return RawLayer(tuple(features), str(path), crs, nulls)


def load_layer(path, format: str | None = None) -> RawLayer:
    """Load a polygon layer.

    ``format`` is ``"esri-shapefile"`` or ``"geojson"``; when omitted it is
    taken from the file extension. Exterior rings come back counter-clockwise.
    """
    path = Path(path)
    if format is None:
        format = LAYER_SUFFIXES.get(path.suffix.lower())
        if format is None:
            raise FormatError(f"{path}: cannot infer format from extension")
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "esri-shapefile":
        return _load_shapefile(path)
    if format == "geojson":
        return _load_geojson(path)
    raise ValueError(f"unknown format {format!r}")


def layer_geojson(layer: RawLayer) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature", "properties": dict(f.attributes), "geometry": mapping(f.geometry)}
            for f in layer.features
        ],
    }


def write_geojson(layer: RawLayer, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(layer_geojson(layer), fh)


# -- catalog ----------------------------------------------------------------

_STEM_RE = re.compile(r"^(?:(?P<region>[A-Za-z0-9]+)_(?P<yyyymm>\d{6})_)?(?P<kind>CS|ML1|ML2)$", re.IGNORECASE)
_REGION_RE = re.compile(r"^[A-Za-z0-9]{1,8}$")


def _parse_conventional(rel: Path) -> CatalogEntry:
    parts = rel.parts
    if len(parts) != 3:
        raise NamingError(f"{rel}: expected <REGION>/<YYYYMM>/<KIND>.<ext>")
    region, yyyymm, fname = parts
    if not _REGION_RE.match(region):
        raise NamingError(f"{rel}: bad region directory {region!r}")
    try:
        period = PeriodId.parse(yyyymm)
    except ValueError as exc:
        raise NamingError(f"{rel}: {exc}") from None
    m = _STEM_RE.match(Path(fname).stem)
    if not m:
        raise NamingError(f"{rel}: file name must be CS, ML1 or ML2 (optionally REGION_YYYYMM_KIND)")
    if m.group("region") and (m.group("region").upper() != region.upper() or m.group("yyyymm") != yyyymm):
        raise NamingError(f"{rel}: file name disagrees with its directories")
    return CatalogEntry(period, LayerKind(m.group("kind").upper()), region, str(rel))


def _read_manifest(root: Path) -> dict[str, CatalogEntry]:
    path = root / MANIFEST_NAME
    if not path.exists():
        return {}
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        out = {}
        for item in doc["entries"]:
            rel = str(Path(item["path"]))
            out[rel] = CatalogEntry(
                PeriodId.parse(item["period"]), LayerKind(item["kind"]), str(item["region"]), rel
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad catalog manifest ({exc})") from exc
    return out


def build_catalog(root, problems: list | None = None) -> list[CatalogEntry]:
    """Scan ``root`` for classification layers.

    Files follow ``<REGION>/<YYYYMM>/<KIND>.<ext>``; ``catalog_manifest.json``
    at the root may map any other file explicitly. Unparseable names are
    skipped, logged, and appended to ``problems`` as :class:`NamingError`.
    Entry paths are relative to ``root``.
    """
    root = Path(root)
    overrides = _read_manifest(root)
    entries: dict[tuple, CatalogEntry] = {}

    def add(entry: CatalogEntry):
        if entry.key in entries:
            other = entries[entry.key]
            raise DuplicateEntryError(
                f"{entry.path} and {other.path} both map to "
                f"{entry.period} {entry.kind} {entry.report_region}"
            )
        entries[entry.key] = entry

    for rel in sorted(overrides):
        if not (root / rel).exists():
            raise FormatError(f"{MANIFEST_NAME}: listed file {rel} does not exist")
        add(overrides[rel])

    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if not d.startswith("."))
        for fname in sorted(filenames):
            if fname.startswith(".") or fname == MANIFEST_NAME:
                continue
            suffix = Path(fname).suffix.lower()
            if suffix not in LAYER_SUFFIXES:
                continue
            rel = Path(dirpath, fname).relative_to(root)
            if str(rel) in overrides:
                continue
            try:
                add(_parse_conventional(rel))
            except NamingError as exc:
                log.warning("skipping %s", exc)
                if problems is not None:
                    problems.append(exc)
    return sorted(entries.values(), key=lambda e: e.sort_key)


# -- IPC attribute ----------------------------------------------------------

def _lookup(attrs: Mapping[str, str], name: str):
    if name in attrs:
        return attrs[name]
    lowered = name.lower()
    for k, v in attrs.items():
        if k.lower() == lowered:
            return v
    raise KeyError(name)


def parse_ipc(text: str, sentinels=DEFAULT_SENTINELS) -> int | None:
    """Parse one attribute value; ``None`` for no-data codes."""
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise RangeError(f"IPC value {text!r} is not a number") from None
    if not value.is_integer():
        raise RangeError(f"IPC value {text!r} is not an integer")
    value = int(value)
    if value in sentinels:
        return None
    if value not in IPC_CLASSES:
        raise RangeError(f"IPC value {value} outside 1..5")
    return value


def validate_ipc(
    layer: RawLayer,
    attribute_name: str,
    sentinels=DEFAULT_SENTINELS,
    drops: Counter | None = None,
) -> list[tuple[Region, int]]:
    out = []
    for i, f in enumerate(layer.features):
        try:
            raw = _lookup(f.attributes, attribute_name)
        except KeyError:
            raise MissingAttributeError(
                f"{layer.source_path}#{i}: no attribute {attribute_name!r} "
                f"(have {sorted(f.attributes)})"
            ) from None
        value = parse_ipc(raw, sentinels)
        if value is None:
            if drops is not None:
                drops["sentinel_ipc"] += 1
            continue
        out.append((f.geometry, value))
    return out
