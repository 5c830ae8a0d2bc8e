"""Admin x livelihood atoms and the classification panel built on them.

The pipeline has three steps:

1. intersect admin units with livelihood zones into atoms (``build_atoms``);
2. intersect each published classification layer with the atoms
   (``assign_classification``);
3. keep the worst IPC class per atom, period and kind (``dedup_worst``) and
   stack everything into one long table (``build_panel``).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import warnings
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import shapely
from shapely.geometry import mapping, shape

from . import geom
from .errors import DegenerateError, EmptyResultError
from .geom import AREA_THRESHOLD, Region
from .ingest import DEFAULT_SENTINELS, CatalogEntry, RawLayer, load_layer, validate_ipc
from .periods import LayerKind, PeriodId

log = logging.getLogger(__name__)

COVERAGE_THRESHOLD = 0.5
KIND_ORDER = {k: i for i, k in enumerate(LayerKind)}
PANEL_COLUMNS = ("atom_id", "country", "admin_id", "livelihood_id", "period", "kind", "ipc", "covered_fraction")


class MissingKindWarning(UserWarning):
    """A period lacks one of the CS/ML1/ML2 layers."""


@dataclass(frozen=True)
class FieldMap:
    """Attribute names carrying the identifier, display name and country of a base-layer feature."""

    id: str
    name: str
    country: str | None = None


# FEWS NET boundary and livelihood layers key their units by FNID.
ADMIN_FIELDS = FieldMap(id="FNID", name="ADMIN2", country="COUNTRY")
LIVELIHOOD_FIELDS = FieldMap(id="FNID", name="LZNAMEEN")


@dataclass(frozen=True)
class Atom:
    atom_id: str
    admin_id: str
    admin_name: str
    country: str
    livelihood_id: str
    livelihood_name: str
    geometry: Region
    area: float


class AtomMeta(NamedTuple):
    country: str
    admin_id: str
    livelihood_id: str


@dataclass(frozen=True)
class ClassificationRecord:
    atom_id: str
    period: PeriodId
    kind: LayerKind
    ipc: int
    covered_fraction: float


def atom_id(admin_id: str, livelihood_id: str) -> str:
    """Stable identifier for an (admin unit, livelihood zone) pair."""
    digest = hashlib.sha1(f"{admin_id}\x1f{livelihood_id}".encode("utf-8")).hexdigest()
    return digest[:16]


def _attr(attrs: Mapping[str, str], name: str | None, default: str = "") -> str:
    if not name:
        return default
    if name in attrs:
        return attrs[name]
    for k, v in attrs.items():
        if k.lower() == name.lower():
            return v
    raise KeyError(name)


def _valid_features(layer: RawLayer, fields: FieldMap, counts: Counter, label: str):
    out = []
    for i, f in enumerate(layer.features):
        try:
            fid = _attr(f.attributes, fields.id)
            name = _attr(f.attributes, fields.name, "")
            country = _attr(f.attributes, fields.country, "").upper()
        except KeyError as exc:
            raise KeyError(f"{layer.source_path}#{i}: {label} layer has no attribute {exc.args[0]!r}") from None
        try:
            g = geom.make_valid(f.geometry)
        except DegenerateError:
            counts[f"{label}_degenerate"] += 1
            continue
        out.append((fid, name, country, g))
    return out


def build_atoms(
    admin: RawLayer,
    livelihood: RawLayer,
    admin_fields: FieldMap = ADMIN_FIELDS,
    livelihood_fields: FieldMap = LIVELIHOOD_FIELDS,
    threshold: float = AREA_THRESHOLD,
    stats: dict | None = None,
) -> list[Atom]:
    """Intersect admin units with livelihood zones and drop slivers.

    Units repeated under one identifier are merged, so each (admin_id,
    livelihood_id) pair yields at most one atom. Atoms are sorted by
    country, admin id and livelihood id.
    """
    counts: Counter = Counter()
    adm = _valid_features(admin, admin_fields, counts, "admin")
    lz = _valid_features(livelihood, livelihood_fields, counts, "livelihood")
    pieces = geom.intersect_layers(
        [(i, g) for i, (*_, g) in enumerate(adm)],
        [(j, g) for j, (*_, g) in enumerate(lz)],
    )
    kept, removed = geom.filter_small(pieces, threshold)

    groups: dict[tuple[str, str], list] = defaultdict(list)
    for p in kept:
        a, z = adm[p.left_id], lz[p.right_id]
        groups[(a[0], z[0])].append((a, z, p.geometry))

    atoms = []
    for (admin_id, lz_id), items in groups.items():
        a, z, _ = items[0]
        if len(items) == 1:
            g = items[0][2]
        else:
            g = geom.as_region(shapely.unary_union([it[2] for it in items]))
        g = geom.normalize(g)
        atoms.append(Atom(atom_id(admin_id, lz_id), admin_id, a[1], a[2], lz_id, z[1], g, geom.area(g)))
    atoms.sort(key=lambda t: (t.country, t.admin_id, t.livelihood_id))

    if stats is not None:
        stats.update(
            admin_features=len(admin),
            livelihood_features=len(livelihood),
            overlay_pieces=len(pieces),
            sliver_pieces=len(pieces) - len(kept),
            removed_area_fraction=removed,
            atoms=len(atoms),
            **counts,
        )
    if not atoms:
        raise EmptyResultError("no admin/livelihood overlap survived the area filter")
    return atoms


def _explode(fs_layer: Sequence[tuple[Region, int]], counts: Counter):
    parts = []
    for g, ipc in fs_layer:
        try:
            g = geom.make_valid(g)
        except DegenerateError:
            counts["fs_degenerate"] += 1
            continue
        for poly in geom.polygons_of(g):
            parts.append((ipc, poly))
    return parts


def assign_classification(
    atoms: Sequence[Atom],
    fs_layer: Sequence[tuple[Region, int]],
    period: PeriodId,
    kind: LayerKind,
    threshold: float | None = AREA_THRESHOLD,
    stats: dict | None = None,
) -> list[ClassificationRecord]:
    """One raw record per (atom, classified polygon) overlap.

    ``threshold=None`` skips sliver filtering for this step.
    """
    counts: Counter = Counter()
    parts = _explode(fs_layer, counts)
    by_id = {a.atom_id: a for a in atoms}
    pieces = geom.intersect_layers(
        [(a.atom_id, a.geometry) for a in atoms],
        [(i, poly) for i, (_, poly) in enumerate(parts)],
    )
    if threshold is None:
        kept, removed = pieces, 0.0
    else:
        kept, removed = geom.filter_small(pieces, threshold)
    records = [
        ClassificationRecord(p.left_id, period, kind, parts[p.right_id][0], p.area / by_id[p.left_id].area)
        for p in kept
    ]
    if stats is not None:
        stats["pieces"] = stats.get("pieces", 0) + len(pieces)
        stats["sliver_pieces"] = stats.get("sliver_pieces", 0) + len(pieces) - len(kept)
        stats["piece_area"] = stats.get("piece_area", 0.0) + math.fsum(p.area for p in pieces)
        stats["sliver_area"] = stats.get("sliver_area", 0.0) + math.fsum(p.area for p in pieces) * removed
        for k, v in counts.items():
            stats[k] = stats.get(k, 0) + v
    return records


def dedup_worst(records: Iterable[ClassificationRecord], stats: dict | None = None) -> list[ClassificationRecord]:
    """Collapse raw records to one per (atom, period, kind), keeping the worst class.

    Covered fractions add up (capped at 1). ``stats["dedup_rate"]`` is the share
    of keys whose raw records disagreed on the class.
    """
    groups: dict[tuple, list[ClassificationRecord]] = defaultdict(list)
    for r in records:
        groups[(r.atom_id, r.period, r.kind)].append(r)
    out = []
    conflicting = 0
    for (aid, period, kind), rs in groups.items():
        if len({r.ipc for r in rs}) > 1:
            conflicting += 1
        cover = min(1.0, math.fsum(r.covered_fraction for r in rs))
        out.append(ClassificationRecord(aid, period, kind, max(r.ipc for r in rs), cover))
    out.sort(key=lambda r: (r.period, KIND_ORDER[r.kind], r.atom_id))
    if stats is not None:
        stats["deduped_keys"] = len(groups)
        stats["conflicting_keys"] = conflicting
        stats["dedup_rate"] = conflicting / len(groups) if groups else 0.0
    return out


# -- panel ------------------------------------------------------------------

class Panel:
    """Long table of deduplicated classifications: one row per (atom, period, kind)."""

    def __init__(self, records: Iterable[ClassificationRecord], atoms: Mapping[str, AtomMeta]):
        self.atoms = dict(atoms)
        rows = sorted(records, key=self._order)
        index = {}
        for r in rows:
            key = (r.atom_id, r.period, r.kind)
            if key in index:
                raise ValueError(f"duplicate panel row for {key}")
            if r.atom_id not in self.atoms:
                raise KeyError(f"record for unknown atom {r.atom_id}")
            index[key] = r
        self.records = rows
        self._index = index

    def _order(self, r: ClassificationRecord):
        m = self.atoms.get(r.atom_id, AtomMeta("", "", ""))
        return (r.period, KIND_ORDER[r.kind], m.country, m.admin_id, m.livelihood_id, r.atom_id)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def get(self, atom_id: str, period: PeriodId, kind: LayerKind = LayerKind.CS) -> int | None:
        r = self._index.get((atom_id, period, kind))
        return None if r is None else r.ipc

    def layer(self, period: PeriodId, kind: LayerKind) -> dict[str, int]:
        """atom_id -> IPC class for one (period, kind)."""
        return {r.atom_id: r.ipc for r in self.records if r.period == period and r.kind == kind}

    def periods(self, kind: LayerKind | None = None) -> list[PeriodId]:
        return sorted({r.period for r in self.records if kind is None or r.kind == kind})

    # persistence
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PANEL_COLUMNS)
        for r in self.records:
            m = self.atoms[r.atom_id]
            w.writerow([r.atom_id, m.country, m.admin_id, m.livelihood_id, str(r.period), r.kind.value, r.ipc, f"{r.covered_fraction:.6f}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_jsonl(self, path=None) -> str:
        lines = []
        for r in self.records:
            m = self.atoms[r.atom_id]
            row = dict(zip(PANEL_COLUMNS, (r.atom_id, m.country, m.admin_id, m.livelihood_id, str(r.period), r.kind.value, r.ipc, round(r.covered_fraction, 6))))
            lines.append(json.dumps(row, sort_keys=False))
        text = "".join(line + "\n" for line in lines)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def read_csv(cls, path) -> "Panel":
        records, atoms = [], {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(PANEL_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: panel is missing columns {sorted(missing)}")
            for row in reader:
                atoms[row["atom_id"]] = AtomMeta(row["country"], row["admin_id"], row["livelihood_id"])
                records.append(
                    ClassificationRecord(
                        row["atom_id"],
                        PeriodId.parse(row["period"]),
                        LayerKind(row["kind"]),
                        int(row["ipc"]),
                        float(row["covered_fraction"]),
                    )
                )
        return cls(records, atoms)


def atom_meta(atoms: Iterable[Atom]) -> dict[str, AtomMeta]:
    return {a.atom_id: AtomMeta(a.country, a.admin_id, a.livelihood_id) for a in atoms}


def _classify_entry(entry, root, atoms, attribute_for, sentinels, threshold):
    counts: Counter = Counter()
    layer = load_layer(Path(root) / entry.path)
    fs = validate_ipc(layer, attribute_for(entry.period, entry.kind), sentinels, counts)
    stats: dict = {"null_geometries": layer.null_geometries, "sentinel_ipc": counts["sentinel_ipc"]}
    recs = assign_classification(atoms, fs, entry.period, entry.kind, threshold, stats)
    return recs, stats


def build_panel(
    catalog: Sequence[CatalogEntry],
    atoms: Sequence[Atom],
    root=".",
    attribute_for: Callable[[PeriodId, LayerKind], str] = lambda period, kind: kind.value,
    sentinels=DEFAULT_SENTINELS,
    area_threshold: float = AREA_THRESHOLD,
    coverage_threshold: float = COVERAGE_THRESHOLD,
    filter_each_overlay: bool = True,
    stats: list | None = None,
    workers: int = 1,
    atom_regions: dict | None = None,
) -> Panel:
    """Project every catalogued layer onto the atoms and stack the results.

    Layers of the same (period, kind) from different report regions are
    deduplicated together. Deduplicated rows covering less than
    ``coverage_threshold`` of their atom are left out. When ``stats`` is a
    list it receives one dict per (period, kind) with the drop counts;
    ``atom_regions`` (a dict) receives the report regions touching each atom.
    """
    if not catalog:
        raise ValueError("catalog is empty")
    threshold = area_threshold if filter_each_overlay else None

    def run(entry):
        return _classify_entry(entry, root, atoms, attribute_for, sentinels, threshold)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, catalog))
    else:
        results = [run(e) for e in catalog]

    by_table: dict[tuple, list] = defaultdict(list)
    for entry, res in zip(catalog, results):
        by_table[(entry.period, entry.kind)].append((entry, res))
        if atom_regions is not None:
            for r in res[0]:
                atom_regions.setdefault(r.atom_id, set()).add(entry.report_region)

    kept_records = []
    for period in sorted({e.period for e in catalog}):
        kinds = {k for (p, k) in by_table if p == period}
        missing = [k.value for k in LayerKind if k not in kinds]
        if missing:
            msg = f"period {period} has no {'/'.join(missing)} layer"
            warnings.warn(msg, MissingKindWarning, stacklevel=2)
            if stats is not None:
                stats.append({"period": str(period), "warning": msg})
        for kind in LayerKind:
            if kind not in kinds:
                continue
            table: dict = {"period": str(period), "kind": kind.value, "layers": []}
            raw = []
            for entry, (recs, st) in by_table[(period, kind)]:
                table["layers"].append(entry.path)
                raw.extend(recs)
                for k, v in st.items():
                    table[k] = table.get(k, 0) + v
            deduped = dedup_worst(raw, table)
            kept = [r for r in deduped if r.covered_fraction >= coverage_threshold]
            piece_area = table.pop("piece_area", 0.0)
            sliver_area = table.pop("sliver_area", 0.0)
            table.update(
                raw_records=len(raw),
                low_coverage=len(deduped) - len(kept),
                records=len(kept),
                removed_area_fraction=sliver_area / piece_area if piece_area else 0.0,
            )
            kept_records.extend(kept)
            if stats is not None:
                stats.append(table)
    return Panel(kept_records, atom_meta(atoms))


# -- atom layer persistence -------------------------------------------------

def atoms_geojson(atoms: Sequence[Atom], as_of: str | None = None) -> dict:
    doc = {"type": "FeatureCollection"}
    if as_of is not None:
        doc["metadata"] = {"as_of": as_of}
    doc["features"] = [
        {
            "type": "Feature",
            "properties": {
                "atom_id": a.atom_id,
                "country": a.country,
                "admin_id": a.admin_id,
                "admin_name": a.admin_name,
                "livelihood_id": a.livelihood_id,
                "livelihood_name": a.livelihood_name,
                "area": round(a.area, 9),
            },
            "geometry": mapping(a.geometry),
        }
        for a in atoms
    ]
    return doc


def write_atoms(atoms: Sequence[Atom], path, as_of: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(atoms_geojson(atoms, as_of), fh)
        fh.write("\n")


def read_atoms(path) -> list[Atom]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    out = []
    for f in doc["features"]:
        p = f["properties"]
        g = geom.normalize(shape(f["geometry"]))
        out.append(Atom(p["atom_id"], p["admin_id"], p["admin_name"], p["country"], p["livelihood_id"], p["livelihood_name"], g, geom.area(g)))
    return out
