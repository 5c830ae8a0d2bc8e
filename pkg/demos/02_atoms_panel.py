"""Build atoms from the bundled fixture and classify them for one period."""

from collections import Counter
from pathlib import Path

from fewseval.atoms import assign_classification, build_atoms, dedup_worst
from fewseval.ingest import load_layer, validate_ipc
from fewseval.periods import LayerKind, PeriodId

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "synthetic"

admin = load_layer(FIXTURE / "base" / "admin.geojson")
livelihood = load_layer(FIXTURE / "base" / "livelihood.geojson")

stats = {}
atoms = build_atoms(admin, livelihood, stats=stats)
print(len(atoms), "atoms from", stats["overlay_pieces"], "overlay pieces,", stats["sliver_pieces"], "sliver dropped")
for a in atoms[:5]:
    print(f"  {a.atom_id:<24} {a.country} {a.admin_name:<12} {a.livelihood_name:<16} area {a.area:.4f}")

# one current-situation layer
period = PeriodId.parse("2021-06")
cs_path = FIXTURE / "data" / "EA" / "202106" / "CS.geojson"
cs = load_layer(cs_path)
drops = Counter()
fs_layer = validate_ipc(cs, "CS", drops=drops)
print(len(fs_layer), "classified polygons; dropped:", dict(drops))

raw = assign_classification(atoms, fs_layer, period, LayerKind.CS)
dstats = {}
records = dedup_worst(raw, dstats)
print(f"{len(raw)} raw records, {len(records)} after keeping the worst class, dedup rate {dstats['dedup_rate']:.3f}")
print("class counts:", dict(sorted(Counter(r.ipc for r in records).items())))
