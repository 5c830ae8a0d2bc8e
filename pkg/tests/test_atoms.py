import math
import warnings
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import box

from conftest import GOLDEN, feature_collection, layer, square, write_json
from fewseval.atoms import (
    ClassificationRecord,
    MissingKindWarning,
    Panel,
    assign_classification,
    atom_id,
    atom_meta,
    atoms_geojson,
    build_atoms,
    build_panel,
    dedup_worst,
    read_atoms,
    write_atoms,
)
from fewseval.config import load_config
from fewseval.errors import EmptyResultError
from fewseval.geom import area
from fewseval.ingest import CatalogEntry, build_catalog, load_layer
from fewseval.periods import LayerKind, PeriodId

P1 = PeriodId(2021, 2)
P2 = PeriodId(2021, 6)
CS, ML1, ML2 = LayerKind.CS, LayerKind.ML1, LayerKind.ML2


def admin(*items):
    return layer(*[(g, {"FNID": fid, "ADMIN2": fid.lower(), "COUNTRY": "aaa"}) for g, fid in items])


def zones(*items):
    return layer(*[(g, {"FNID": fid, "LZNAMEEN": f"zone {fid}"}) for g, fid in items])


def single_atom(g=(0, 0, 1, 1)):
    return build_atoms(admin((g, "A1")), zones((g, "Z1")))


def rec(aid, ipc, frac=1.0, period=P1, kind=CS):
    return ClassificationRecord(aid, period, kind, ipc, frac)


# -- build_atoms ------------------------------------------------------------

def test_single_coincident_pair_is_one_atom():
    atoms = single_atom()
    assert len(atoms) == 1
    a = atoms[0]
    assert a.area == 1.0
    assert (a.admin_id, a.livelihood_id, a.country) == ("A1", "Z1", "AAA")
    assert a.atom_id == atom_id("A1", "Z1")


def test_crossing_halves_give_four_atoms():
    atoms = build_atoms(
        admin(((0, 0, 1, 2), "A1"), ((1, 0, 2, 2), "A2")),
        zones(((0, 0, 2, 1), "Z1"), ((0, 1, 2, 2), "Z2")),
    )
    assert [(a.admin_id, a.livelihood_id) for a in atoms] == [("A1", "Z1"), ("A1", "Z2"), ("A2", "Z1"), ("A2", "Z2")]
    assert all(a.area == pytest.approx(1.0) for a in atoms)


def test_sliver_from_imperfect_edge_is_dropped():
    stats = {}
    # zone Z1 overshoots the A1/A2 border by 0.001 degrees along a unit edge
    atoms = build_atoms(
        admin(((0, 0, 1, 1), "A1"), ((1, 0, 2, 1), "A2")),
        zones(((0, 0, 1.001, 1), "Z1"), ((1.001, 0, 2, 1), "Z2")),
        stats=stats,
    )
    assert {(a.admin_id, a.livelihood_id) for a in atoms} == {("A1", "Z1"), ("A2", "Z2")}
    assert stats["overlay_pieces"] == 3 and stats["sliver_pieces"] == 1
    assert stats["removed_area_fraction"] == pytest.approx(0.001 / 2, rel=1e-6)


def test_repeated_admin_id_is_merged():
    atoms = build_atoms(admin(((0, 0, 1, 1), "A1"), ((1, 0, 2, 1), "A1")), zones(((0, 0, 2, 1), "Z1")))
    assert len(atoms) == 1 and atoms[0].area == pytest.approx(2.0)


def test_no_overlap_raises():
    with pytest.raises(EmptyResultError):
        build_atoms(admin(((0, 0, 1, 1), "A1")), zones(((5, 5, 6, 6), "Z1")))


def test_missing_field_is_reported():
    bad = layer(((0, 0, 1, 1), {"ID": "A1"}))
    with pytest.raises(KeyError, match="FNID"):
        build_atoms(bad, zones(((0, 0, 1, 1), "Z1")))


def test_atom_id_is_stable():
    assert atom_id("A1", "Z1") == atom_id("A1", "Z1") != atom_id("A1Z", "1")
    assert len(atom_id("A1", "Z1")) == 16


def test_atoms_are_deterministic(tmp_path):
    mk = lambda: build_atoms(
        admin(((0, 0, 1, 2), "A2"), ((1, 0, 2, 2), "A1")),
        zones(((0, 0, 2, 1), "Z2"), ((0, 1, 2, 2), "Z1")),
    )
    write_atoms(mk(), tmp_path / "a.geojson", as_of="2023-09")
    write_atoms(mk(), tmp_path / "b.geojson", as_of="2023-09")
    assert (tmp_path / "a.geojson").read_bytes() == (tmp_path / "b.geojson").read_bytes()


def test_atoms_round_trip(tmp_path):
    atoms = single_atom()
    write_atoms(atoms, tmp_path / "atoms.geojson", as_of="2023-09")
    assert atoms_geojson(atoms, "2023-09")["metadata"] == {"as_of": "2023-09"}
    back = read_atoms(tmp_path / "atoms.geojson")
    assert [(a.atom_id, a.area) for a in back] == [(a.atom_id, a.area) for a in atoms]


# -- assign_classification --------------------------------------------------

def test_exact_cover_gives_full_fraction():
    recs = assign_classification(single_atom(), [(box(0, 0, 1, 1), 2)], P1, CS)
    assert recs == [ClassificationRecord(atom_id("A1", "Z1"), P1, CS, 2, 1.0)]


def test_disjoint_layer_gives_nothing():
    assert assign_classification(single_atom(), [(box(3, 3, 4, 4), 2)], P1, CS) == []


def test_split_atom_gives_two_records():
    recs = assign_classification(single_atom(), [(box(0, 0, 0.6, 1), 2), (box(0.6, 0, 1, 1), 4)], P1, CS)
    assert sorted((r.ipc, round(r.covered_fraction, 12)) for r in recs) == [(2, 0.6), (4, 0.4)]


def test_multipolygon_parts_are_separate_records():
    from shapely.geometry import MultiPolygon

    fs = [(MultiPolygon([box(0, 0, 0.4, 1), box(0.6, 0, 1, 1)]), 3)]
    recs = assign_classification(single_atom(), fs, P1, CS)
    assert len(recs) == 2 and math.fsum(r.covered_fraction for r in recs) == pytest.approx(0.8)
    assert dedup_worst(recs)[0].covered_fraction == pytest.approx(0.8)


def test_sliver_records_follow_threshold():
    atoms = single_atom((0, 0, 1, 1))
    fs = [(box(0, 0, 0.997, 1), 2), (box(0.997, 0, 1, 1), 5)]
    assert {r.ipc for r in assign_classification(atoms, fs, P1, CS)} == {2}
    assert {r.ipc for r in assign_classification(atoms, fs, P1, CS, threshold=None)} == {2, 5}


# -- dedup_worst ------------------------------------------------------------

def test_dedup_keeps_worst():
    stats = {}
    out = dedup_worst([rec("a", 2, 0.6), rec("a", 4, 0.4)], stats)
    assert len(out) == 1 and out[0].ipc == 4
    assert out[0].covered_fraction == pytest.approx(1.0)
    assert stats == {"deduped_keys": 1, "conflicting_keys": 1, "dedup_rate": 1.0}


def test_dedup_single_record_unchanged():
    r = rec("a", 3, 0.8)
    assert dedup_worst([r]) == [r]


def test_dedup_clamps_fraction():
    out = dedup_worst([rec("a", 2, 0.7), rec("a", 2, 0.7)])
    assert out[0].covered_fraction == 1.0


def test_dedup_rate_counts_disagreeing_keys_only():
    stats = {}
    dedup_worst([rec("a", 2), rec("a", 2), rec("b", 1), rec("b", 3), rec("c", 1), rec("d", 5)], stats)
    assert stats["dedup_rate"] == 0.25


records = st.lists(
    st.tuples(st.sampled_from("abcde"), st.integers(1, 5), st.floats(0.01, 1.0)), min_size=1, max_size=40
)


@settings(max_examples=200, deadline=None)
@given(records)
def test_dedup_monotone_and_unique(raw):
    recs = [rec(a, ipc, f) for a, ipc, f in raw]
    out = dedup_worst(recs)
    keys = [(r.atom_id, r.period, r.kind) for r in out]
    assert len(keys) == len(set(keys))
    by_key = {r.atom_id: r for r in out}
    for r in recs:
        assert by_key[r.atom_id].ipc >= r.ipc
    assert all(0 < r.covered_fraction <= 1.0 for r in out)


# -- panel ------------------------------------------------------------------

def five_atoms():
    return build_atoms(admin(*[((i, 0, i + 1, 1), f"A{i}") for i in range(5)]), zones(((0, 0, 5, 1), "Z1")))


def write_table(root, period, kind, ipcs):
    rel = f"EA/{period.compact}/{kind.value}.geojson"
    items = [(square(i, 0, i + 1, 1), {kind.value: str(v)}) for i, v in enumerate(ipcs)]
    write_json(root / rel, feature_collection(*items))
    return CatalogEntry(period, kind, "EA", rel)


def test_full_panel_counts(tmp_path):
    atoms = five_atoms()
    catalog = [write_table(tmp_path, p, k, [1, 2, 3, 4, 5]) for p in (P1, P2) for k in LayerKind]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        panel = build_panel(catalog, atoms, root=tmp_path)
    assert len(panel) == 30
    assert panel.periods() == [P1, P2]
    assert sorted(panel.layer(P2, ML2).values()) == [1, 2, 3, 4, 5]


def test_missing_kind_warns_once(tmp_path):
    atoms = five_atoms()
    catalog = [write_table(tmp_path, P1, k, [2] * 5) for k in (CS, ML1)]
    stats = []
    with pytest.warns(MissingKindWarning) as caught:
        panel = build_panel(catalog, atoms, root=tmp_path, stats=stats)
    assert len(caught) == 1 and "ML2" in str(caught[0].message)
    assert len(panel) == 10
    assert {r.kind for r in panel} == {CS, ML1}


def test_panel_rejects_duplicate_key():
    meta = atom_meta(single_atom())
    aid = next(iter(meta))
    with pytest.raises(ValueError):
        Panel([rec(aid, 2), rec(aid, 3)], meta)


def test_panel_csv_round_trip(tmp_path):
    atoms = five_atoms()
    catalog = [write_table(tmp_path, P1, k, [1, 2, 3, 4, 5]) for k in LayerKind]
    panel = build_panel(catalog, atoms, root=tmp_path)
    panel.to_csv(tmp_path / "panel.csv")
    back = Panel.read_csv(tmp_path / "panel.csv")
    assert back.to_csv() == panel.to_csv()
    assert panel.get(atoms[2].atom_id, P1, ML1) == 3
    assert panel.get(atoms[2].atom_id, P2) is None


def test_synthetic_panel_matches_golden(synthetic_tree):
    cfg = load_config(synthetic_tree / "config.json")
    atoms = build_atoms(load_layer(cfg.admin_path), load_layer(cfg.livelihood_path))
    assert len(atoms) == 20
    stats = []
    panel = build_panel(build_catalog(cfg.data_root), atoms, root=cfg.data_root, stats=stats)
    assert panel.to_csv() == (GOLDEN / "panel.csv").read_text()
    tables = {(t["period"], t["kind"]): t for t in stats}
    # the 2021-06 split atom is the one disagreement in that table
    assert tables[("2021-06", "CS")]["conflicting_keys"] == 1
    assert tables[("2021-10", "CS")]["low_coverage"] == 1
    assert tables[("2021-02", "ML1")]["sentinel_ipc"] == 1


def test_coverage_accounting_on_synthetic(synthetic_tree):
    cfg = load_config(synthetic_tree / "config.json")
    atoms = build_atoms(load_layer(cfg.admin_path), load_layer(cfg.livelihood_path))
    by_id = {a.atom_id: a for a in atoms}
    catalog = build_catalog(cfg.data_root)
    panel = build_panel(catalog, atoms, root=cfg.data_root, coverage_threshold=1e-12)
    for e in catalog:
        fs_area = math.fsum(area(f.geometry) for f in load_layer(cfg.data_root / e.path))
        covered = math.fsum(
            r.covered_fraction * by_id[r.atom_id].area for r in panel if (r.period, r.kind) == (e.period, e.kind)
        )
        assert covered <= fs_area + 1e-6
    seen = Counter((r.atom_id, r.period, r.kind) for r in panel)
    assert max(seen.values()) == 1
