"""Planar polygon geometry on lon/lat coordinates.

Regions are shapely ``Polygon``/``MultiPolygon`` values. Areas are planar and
measured in square degrees. GEOS (through shapely) is the clipping kernel;
repair is checked against an area reference computed here from the raw rings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence, Union

import numpy as np
import shapely
from shapely.geometry import MultiPolygon, Polygon, mapping
from shapely.geometry.polygon import orient

from .errors import DegenerateError, RepairError, TopologyError

Region = Union[Polygon, MultiPolygon]

AREA_THRESHOLD = 0.005  # square degrees
SNAP_GRID = 1e-12  # degrees; snap-rounding grid of the overlay
REPAIR_TOLERANCE = 1e-6  # relative area change allowed by make_valid


@dataclass(frozen=True)
class OverlayPiece:
    geometry: Region
    left_id: Hashable
    right_id: Hashable
    area: float


def region(polygons: Sequence[tuple]) -> Region:
    """Build a Region from ``[(exterior, [hole, ...]), ...]`` coordinate lists."""
    parts = [Polygon(ext, holes or None) for ext, holes in polygons]
    if len(parts) == 1:
        return parts[0]
    return MultiPolygon(parts)


def polygons_of(geom) -> list[Polygon]:
    """Polygonal parts of any geometry; lines and points are discarded."""
    if geom is None or geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    if hasattr(geom, "geoms"):
        out = []
        for g in geom.geoms:
            out.extend(polygons_of(g))
        return out
    return []


def as_region(geom) -> Region | None:
    parts = [p for p in polygons_of(geom) if not p.is_empty]
    if not parts:
        return None
    if len(parts) == 1:
        return parts[0]
    return MultiPolygon(parts)


def normalize(r: Region) -> Region:
    """Orient exterior rings counter-clockwise and holes clockwise."""
    if isinstance(r, Polygon):
        return orient(r, 1.0)
    return MultiPolygon([orient(p, 1.0) for p in r.geoms])


# -- area -------------------------------------------------------------------

def ring_signed_area(coords) -> float:
    """Shoelace area of a ring; positive when counter-clockwise."""
    xy = np.asarray(coords, dtype=float)[:, :2]
    if len(xy) < 3:
        return 0.0
    x, y = xy[:, 0], xy[:, 1]
    # shifting by the first vertex keeps the cross products small
    x = x - x[0]
    y = y - y[0]
    return 0.5 * float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]) + (x[-1] * y[0] - x[0] * y[-1]))


def area(r: Region) -> float:
    """Planar area in square degrees, holes subtracted."""
    total = 0.0
    for p in polygons_of(r):
        total += abs(ring_signed_area(p.exterior.coords))
        for hole in p.interiors:
            total -= abs(ring_signed_area(hole.coords))
    return max(total, 0.0)


# -- repair -----------------------------------------------------------------

def _segment_crossings(xy: np.ndarray) -> dict[int, list[tuple[float, tuple[float, float]]]]:
    """Proper crossings between non-adjacent segments of a closed ring.

    Returns, per segment index, ``(t, point)`` where ``t`` is the parameter
    along that segment. The same point object is shared by both segments.
    """
    n = len(xy) - 1
    if n < 4:
        return {}
    segs = [shapely.LineString([xy[i], xy[i + 1]]) for i in range(n)]
    tree = shapely.STRtree(segs)
    left, right = tree.query(segs, predicate="intersects")
    keep = left < right
    left, right = left[keep], right[keep]
    out: dict[int, list] = {}
    for i, j in zip(left.tolist(), right.tolist()):
        if j == i + 1 or (i == 0 and j == n - 1):
            continue
        p, r = xy[i], xy[i + 1] - xy[i]
        q, s = xy[j], xy[j + 1] - xy[j]
        denom = r[0] * s[1] - r[1] * s[0]
        if denom == 0.0:
            continue  # collinear overlap, contributes no area
        qp = q - p
        t = (qp[0] * s[1] - qp[1] * s[0]) / denom
        u = (qp[0] * r[1] - qp[1] * r[0]) / denom
        if not (0.0 <= t <= 1.0 and 0.0 <= u <= 1.0):
            continue
        point = (float(p[0] + t * r[0]), float(p[1] + t * r[1]))
        if t == 0.0:
            point = (float(xy[i][0]), float(xy[i][1]))
        elif t == 1.0:
            point = (float(xy[i + 1][0]), float(xy[i + 1][1]))
        out.setdefault(i, []).append((t, point))
        out.setdefault(j, []).append((u, point))
    return out


def ring_loops(coords) -> list[list[tuple[float, float]]]:
    """Split a possibly self-intersecting ring into simple closed loops.

    Crossing and touching points are inserted into the vertex walk, which is
    then cut every time it returns to a point already on the stack.
    """
    xy = np.asarray(coords, dtype=float)[:, :2]
    if len(xy) and (xy[0] != xy[-1]).any():
        xy = np.vstack([xy, xy[:1]])
    crossings = _segment_crossings(xy)
    walk: list[tuple[float, float]] = []
    for i in range(len(xy) - 1):
        walk.append((float(xy[i][0]), float(xy[i][1])))
        for _, pt in sorted(crossings.get(i, ())):
            if pt != walk[-1]:
                walk.append(pt)
    walk.append(walk[0])

    loops = []
    stack: list[tuple[float, float]] = []
    seen: dict[tuple[float, float], int] = {}
    for pt in walk:
        if pt in seen:
            k = seen[pt]
            loop = stack[k:] + [pt]
            if len(loop) >= 4 and ring_signed_area(loop) != 0.0:
                loops.append(loop)
            for q in stack[k + 1:]:
                seen.pop(q, None)
            del stack[k + 1:]
        else:
            seen[pt] = len(stack)
            stack.append(pt)
    return loops


def even_odd_area(rings) -> float:
    """Area covered by an odd number of the given rings.

    This is the point-in-polygon reading of a self-intersecting outline: the
    rings are cut into simple loops and the loops are combined by symmetric
    difference. A bowtie gives both lobes; a ring wound twice gives nothing
    extra.
    """
    acc = None
    for ring in rings:
        for loop in ring_loops(ring):
            poly = Polygon(loop)
            acc = poly if acc is None else acc.symmetric_difference(poly)
    return 0.0 if acc is None else float(acc.area)


def _reference_area(p: Polygon) -> float:
    return even_odd_area([p.exterior.coords, *(h.coords for h in p.interiors)])


def _check_finite(r) -> None:
    coords = shapely.get_coordinates(r)
    if not np.isfinite(coords).all():
        raise ValueError("region has non-finite coordinates")


def make_valid(r: Region, tolerance: float = REPAIR_TOLERANCE) -> Region:
    """Return a valid, oriented version of ``r``.

    Each polygon part is repaired on its own with the GEOS "linework" method,
    which keeps whatever an even-odd point-in-polygon test counts as inside,
    and checked against :func:`even_odd_area` of its raw rings; the repaired
    parts are then unioned. Raises :class:`RepairError` when a part's
    area moves by more than ``tolerance`` (relative) and
    :class:`DegenerateError` for zero-area input.
    """
    _check_finite(r)
    parts = polygons_of(r)
    if not parts:
        raise DegenerateError("empty region")
    if r.is_valid:
        if area(r) <= 0.0:
            raise DegenerateError("region has zero area")
        return normalize(r)

    fixed = []
    for p in parts:
        if p.is_valid:
            if p.area > 0:
                fixed.append(p)
            continue
        ref = _reference_area(p)
        repaired = as_region(shapely.make_valid(p, method="linework"))
        got = 0.0 if repaired is None else area(repaired)
        scale = max(abs(ref), got)
        if scale == 0.0:
            continue
        if abs(got - ref) > tolerance * scale:
            raise RepairError(f"repair changed area from {ref:.12g} to {got:.12g}")
        fixed.append(repaired)
    if not fixed:
        raise DegenerateError("region has zero area")
    out = fixed[0] if len(fixed) == 1 else shapely.unary_union(fixed)
    out = as_region(out)
    if out is None or area(out) <= 0.0:
        raise DegenerateError("region has zero area")
    return normalize(out)


def snap(r: Region, grid: float = SNAP_GRID) -> Region:
    """Snap vertices to a regular grid; the result stays valid."""
    if not grid:
        return r
    out = as_region(shapely.set_precision(r, grid))
    return out if out is not None else r


# -- overlay ----------------------------------------------------------------

def _as_array(features):
    ids, geoms = [], []
    for fid, g in features:
        ids.append(fid)
        geoms.append(g)
    arr = np.empty(len(geoms), dtype=object)
    arr[:] = geoms
    return ids, arr


def _intersect_pair(ga, gb, grid: float):
    try:
        return shapely.intersection(ga, gb, grid_size=grid or None)
    except shapely.errors.GEOSException:
        pass
    try:
        return shapely.intersection(make_valid(ga), make_valid(gb), grid_size=grid or None)
    except (shapely.errors.GEOSException, RepairError, DegenerateError) as exc:
        raise TopologyError(f"intersection failed after repair: {exc}") from exc


def intersect_layers(
    a: Iterable[tuple[Hashable, Region]],
    b: Iterable[tuple[Hashable, Region]],
    grid: float = SNAP_GRID,
) -> list[OverlayPiece]:
    """Intersect every feature of ``a`` with every feature of ``b``.

    One piece per overlapping (a, b) pair with positive area, ordered by the
    position of the features in ``a`` then ``b``. GEOS runs in snap-rounding
    mode on a ``grid`` (degrees), which keeps nearly coincident edges from
    producing wrong output; pairs that still fail are retried after repair.
    """
    ids_a, geoms_a = _as_array(a)
    ids_b, geoms_b = _as_array(b)
    if not len(geoms_a) or not len(geoms_b):
        return []
    tree = shapely.STRtree(geoms_b)
    ia, ib = tree.query(geoms_a, predicate="intersects")
    order = np.lexsort((ib, ia))
    ia, ib = ia[order], ib[order]

    try:
        inter = shapely.intersection(geoms_a[ia], geoms_b[ib], grid_size=grid or None)
    except shapely.errors.GEOSException:
        inter = [_intersect_pair(geoms_a[i], geoms_b[j], grid) for i, j in zip(ia, ib)]

    pieces = []
    for i, j, g in zip(ia.tolist(), ib.tolist(), inter):
        r = as_region(g)
        if r is None:
            continue
        a_ = area(r)
        if a_ <= 0.0:
            continue
        pieces.append(OverlayPiece(normalize(r), ids_a[i], ids_b[j], a_))
    return pieces


def filter_small(
    pieces: Sequence[OverlayPiece], threshold: float = AREA_THRESHOLD
) -> tuple[list[OverlayPiece], float]:
    """Drop pieces whose area is strictly smaller than ``threshold``.

    Returns the kept pieces and the dropped share of the total area.
    """
    kept = [p for p in pieces if p.area >= threshold]
    total = math.fsum(p.area for p in pieces)
    if total <= 0.0:
        return kept, 0.0
    dropped = math.fsum(p.area for p in pieces if p.area < threshold)
    return kept, dropped / total


def pieces_geojson(pieces: Sequence[OverlayPiece]) -> dict:
    """FeatureCollection for eyeballing an overlay in a GIS viewer."""
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"left_id": str(p.left_id), "right_id": str(p.right_id), "area": p.area},
                "geometry": mapping(p.geometry),
            }
            for p in pieces
        ],
    }


def dump_pieces(pieces: Sequence[OverlayPiece], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(pieces_geojson(pieces), fh)
