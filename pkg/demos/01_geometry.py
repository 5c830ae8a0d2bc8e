"""Overlay two small layers, repair a self-crossing ring, drop slivers."""

from shapely.geometry import Polygon, box

from fewseval import geom

# a bowtie ring crosses itself; repair splits it into two triangles
bowtie = Polygon([(0, 0), (1, 1), (1, 0), (0, 1)])
fixed = geom.make_valid(bowtie)
print("bowtie repaired into", len(geom.polygons_of(fixed)), "parts, area", geom.area(fixed))

# admin units: two halves of the unit square
admin = [("A1", box(0, 0, 0.5, 1)), ("A2", box(0.5, 0, 1, 1))]
# livelihood zones: the shared edge sits 0.002 east of the admin border,
# which leaves a thin strip of A2 inside LZ1
zones = [("LZ1", box(0, 0, 0.502, 1)), ("LZ2", box(0.502, 0, 1, 1))]

pieces = geom.intersect_layers(admin, zones)
for p in pieces:
    print(f"{p.left_id} x {p.right_id}: area {p.area:.4f}")

kept, removed = geom.filter_small(pieces, threshold=0.005)
print(f"{len(pieces)} pieces, {len(kept)} kept, {removed:.4%} of the area removed")

# the pieces tile the admin layer
total = sum(p.area for p in pieces)
print("sum of piece areas", round(total, 12))
