"""Writes building20.xml (gbXML, 20 surfaces) and building20_manifest.csv.

The manifest normal is the normalized cross product of the first two loop edges,
which matches the loop winding for the convex polygons used here.
"""
import csv
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent


def rect_z(x0, x1, y0, y1, z, up):
    pts = [(x0, y0, z), (x1, y0, z), (x1, y1, z), (x0, y1, z)]
    return pts if up else pts[::-1]


def wall_x(x, y0, y1, z0, z1):
    return [(x, y0, z0), (x, y1, z0), (x, y1, z1), (x, y0, z1)]


def wall_y(y, x0, x1, z0, z1):
    return [(x1, y, z0), (x0, y, z0), (x0, y, z1), (x1, y, z1)]


surfaces = []
for storey, (z0, z1) in enumerate([(0.0, 3.0), (3.0, 6.0)]):
    s = storey + 1
    floor_type = "SlabOnGrade" if storey == 0 else "InteriorFloor"
    surfaces.append((f"s{s}-floor-a", floor_type, rect_z(0, 5, 0, 4, z0, False)))
    surfaces.append((f"s{s}-floor-b", floor_type, rect_z(5, 9, 0, 4, z0, False)))
    surfaces.append((f"s{s}-ceiling-a", "Ceiling", rect_z(0, 5, 0, 4, z1, True)))
    surfaces.append((f"s{s}-ceiling-b", "Ceiling", rect_z(5, 9, 0, 4, z1, False)))
    surfaces.append((f"s{s}-wall-west", "ExteriorWall", wall_x(0, 4, 0, z0, z1)))
    surfaces.append((f"s{s}-wall-east", "ExteriorWall", wall_x(9, 0, 4, z0, z1)))
    surfaces.append((f"s{s}-wall-south", "ExteriorWall", wall_y(0, 0, 9, z0, z1)))
    surfaces.append((f"s{s}-wall-north", "ExteriorWall", wall_y(4, 9, 0, z0, z1)))
    surfaces.append((f"s{s}-wall-partition", "InteriorWall", wall_x(5, 0, 4, z0, z1)))
# Pitched roof over both storeys, ridge along x at y = 2, z = 7.
surfaces.append(("roof-south", "Roof", [(0, 0, 6), (9, 0, 6), (9, 2, 7), (0, 2, 7)]))
surfaces.append(("roof-north", "Roof", [(9, 4, 6), (0, 4, 6), (0, 2, 7), (9, 2, 7)]))
assert len(surfaces) == 20


def normal_offset(pts):
    a, b, c = pts[0], pts[1], pts[2]
    u = [b[i] - a[i] for i in range(3)]
    v = [c[i] - b[i] for i in range(3)]
    n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    length = math.sqrt(sum(x * x for x in n))
    n = [x / length for x in n]
    return n, sum(n[i] * a[i] for i in range(3))


def category(surface_type):
    if "Ceiling" in surface_type:
        return "Ceiling"
    if "Floor" in surface_type or "SlabOnGrade" in surface_type:
        return "Floor"
    if "Wall" in surface_type:
        return "Wall"
    return "Other"


lines = ['<?xml version="1.0" encoding="UTF-8"?>',
         '<gbXML xmlns="http://www.gbxml.org/schema" lengthUnit="Meters" version="0.37">',
         '  <Campus id="campus-1">']
for sid, stype, pts in surfaces:
    lines.append(f'    <Surface id="{sid}" surfaceType="{stype}">')
    lines.append('      <PlanarGeometry>')
    lines.append('        <PolyLoop>')
    for p in pts:
        coords = "".join(f"<Coordinate>{float(c):g}</Coordinate>" for c in p)
        lines.append(f'          <CartesianPoint>{coords}</CartesianPoint>')
    lines.append('        </PolyLoop>')
    lines.append('      </PlanarGeometry>')
    lines.append('    </Surface>')
lines += ['  </Campus>', '</gbXML>']
(HERE / "building20.xml").write_text("\n".join(lines) + "\n")

with open(HERE / "building20_manifest.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["id", "type", "nx", "ny", "nz", "offset"])
    for sid, stype, pts in surfaces:
        n, d = normal_offset(pts)
        w.writerow([sid, category(stype)] + [repr(x) for x in n] + [repr(d)])
