"""Seeded synthetic scan generator with analytic ground-truth wireframes.

Shapes are desk-scale stand-ins for real scans: surface samples with
perpendicular Gaussian noise and spherical hole removals emulate captures
with missing data near the feature regions.  Every shape also reports its
exact feature wireframe (straight edges and circles) for oracle comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud, EmptyCloudError

SHAPES = ("cube", "box-with-slot", "cylinder", "two-box-union")


@dataclass
class Wireframe:
    """Ground-truth feature curves: straight segments and circles."""

    edges: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    circles: list[tuple[np.ndarray, float, np.ndarray]] = field(default_factory=list)

    def sample(self, step: float) -> np.ndarray:
        """Dense points along every primitive at roughly `step` spacing."""
        pts = []
        for a, b in self.edges:
            n = max(2, int(np.ceil(np.linalg.norm(b - a) / step)) + 1)
            t = np.linspace(0.0, 1.0, n)
            pts.append(a[None, :] + t[:, None] * (b - a)[None, :])
        for center, radius, normal in self.circles:
            u, v = _plane_basis(normal)
            n = max(8, int(np.ceil(2 * np.pi * radius / step)))
            ang = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
            pts.append(center[None, :] + radius * (np.outer(np.cos(ang), u) + np.outer(np.sin(ang), v)))
        return np.vstack(pts)

    def corner_count(self) -> int:
        """Number of distinct points where at least two edges meet."""
        endpoints = []
        for a, b in self.edges:
            endpoints.extend([tuple(np.round(a, 9)), tuple(np.round(b, 9))])
        uniq = {}
        for p in endpoints:
            uniq[p] = uniq.get(p, 0) + 1
        return sum(1 for c in uniq.values() if c >= 2)

    def to_json(self) -> dict:
        return {
            "edges": [[a.tolist(), b.tolist()] for a, b in self.edges],
            "circles": [{"center": c.tolist(), "radius": float(r), "normal": n.tolist()}
                        for c, r, n in self.circles],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Wireframe":
        return cls(
            edges=[(np.array(a, dtype=float), np.array(b, dtype=float)) for a, b in data["edges"]],
            circles=[(np.array(c["center"], dtype=float), float(c["radius"]),
                      np.array(c["normal"], dtype=float)) for c in data["circles"]],
        )


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = normal / np.linalg.norm(normal)
    seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, seed)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


@dataclass
class SyntheticSpec:
    shape: str
    density: float                 # samples per unit area
    noise: float = 0.0             # perpendicular stddev as a fraction of the bbox diagonal
    holes: list[tuple] = field(default_factory=list)   # (center xyz, radius)
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if self.density <= 0:
            raise ValueError("sampling density must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        for _, r in self.holes:
            if r < 0:
                raise ValueError("hole radii must be non-negative")


def _rect(o, e1, e2):
    o, e1, e2 = (np.asarray(v, dtype=float) for v in (o, e1, e2))
    n = np.cross(e1, e2)
    area = np.linalg.norm(n)
    return {"kind": "rect", "o": o, "e1": e1, "e2": e2, "n": n / area, "area": area}


def _disk(center, radius, normal):
    return {"kind": "disk", "c": np.asarray(center, dtype=float), "r": float(radius),
            "n": np.asarray(normal, dtype=float), "area": np.pi * radius ** 2}


def _cyl(base, axis, radius):
    axis = np.asarray(axis, dtype=float)
    h = np.linalg.norm(axis)
    return {"kind": "cyl", "c": np.asarray(base, dtype=float), "axis": axis, "r": float(radius),
            "area": 2 * np.pi * radius * h}


def _seg(a, b):
    return (np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def _cube_geometry():
    patches = [
        _rect([0, 0, 0], [1, 0, 0], [0, 1, 0]),   # z = 0
        _rect([0, 0, 1], [0, 1, 0], [1, 0, 0]),   # z = 1
        _rect([0, 0, 0], [0, 0, 1], [1, 0, 0]),   # y = 0
        _rect([0, 1, 0], [1, 0, 0], [0, 0, 1]),   # y = 1
        _rect([0, 0, 0], [0, 1, 0], [0, 0, 1]),   # x = 0
        _rect([1, 0, 0], [0, 0, 1], [0, 1, 0]),   # x = 1
    ]
    corners = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    edges = []
    for a in corners:
        for b in corners:
            if a < b and sum(abs(ai - bi) for ai, bi in zip(a, b)) == 1:
                edges.append(_seg(a, b))
    return patches, Wireframe(edges=edges)


def _box_with_slot_geometry():
    # unit cube with a groove of width 0.3, depth 0.4 milled along y into the top face
    x0, x1, zf = 0.35, 0.65, 0.6
    patches = [
        _rect([0, 0, 0], [1, 0, 0], [0, 1, 0]),                        # bottom
        _rect([0, 0, 0], [0, 1, 0], [0, 0, 1]),                        # x = 0
        _rect([1, 0, 0], [0, 0, 1], [0, 1, 0]),                        # x = 1
        _rect([0, 0, 1], [0, 1, 0], [x0, 0, 0]),                       # top strip left
        _rect([x1, 0, 1], [0, 1, 0], [1 - x1, 0, 0]),                  # top strip right
        _rect([x0, 0, zf], [0, 1, 0], [x1 - x0, 0, 0]),                # groove floor
        _rect([x0, 0, zf], [0, 0, 1 - zf], [0, 1, 0]),                 # groove wall x0
        _rect([x1, 0, zf], [0, 1, 0], [0, 0, 1 - zf]),                 # groove wall x1
        # y = 0 face minus notch
        _rect([0, 0, 0], [0, 0, 1], [x0, 0, 0]),
        _rect([x1, 0, 0], [0, 0, 1], [1 - x1, 0, 0]),
        _rect([x0, 0, 0], [x1 - x0, 0, 0], [0, 0, zf]),
        # y = 1 face minus notch
        _rect([0, 1, 0], [x0, 0, 0], [0, 0, 1]),
        _rect([x1, 1, 0], [1 - x1, 0, 0], [0, 0, 1]),
        _rect([x0, 1, 0], [0, 0, zf], [x1 - x0, 0, 0]),
    ]
    edges = []
    # bottom square, vertical corners, full top edges along y at x = 0, 1
    edges += [_seg([0, 0, 0], [1, 0, 0]), _seg([0, 1, 0], [1, 1, 0]),
              _seg([0, 0, 0], [0, 1, 0]), _seg([1, 0, 0], [1, 1, 0])]
    edges += [_seg([x, y, 0], [x, y, 1]) for x in (0, 1) for y in (0, 1)]
    edges += [_seg([0, 0, 1], [0, 1, 1]), _seg([1, 0, 1], [1, 1, 1])]
    # split top edges along x
    for y in (0, 1):
        edges += [_seg([0, y, 1], [x0, y, 1]), _seg([x1, y, 1], [1, y, 1])]
    # groove rims and floor creases along y
    for x in (x0, x1):
        edges += [_seg([x, 0, 1], [x, 1, 1]), _seg([x, 0, zf], [x, 1, zf])]
    # notch outlines on the end faces
    for y in (0, 1):
        edges += [_seg([x0, y, zf], [x0, y, 1]), _seg([x1, y, zf], [x1, y, 1]),
                  _seg([x0, y, zf], [x1, y, zf])]
    return patches, Wireframe(edges=edges)


def _cylinder_geometry():
    patches = [
        _cyl([0, 0, 0], [0, 0, 2], 1.0),
        _disk([0, 0, 0], 1.0, [0, 0, -1]),
        _disk([0, 0, 2], 1.0, [0, 0, 1]),
    ]
    wire = Wireframe(circles=[
        (np.array([0.0, 0.0, 0.0]), 1.0, np.array([0.0, 0.0, 1.0])),
        (np.array([0.0, 0.0, 2.0]), 1.0, np.array([0.0, 0.0, 1.0])),
    ])
    return patches, wire


def _two_box_union_geometry():
    # base box [0,1]^2 x [0,0.5] with a tower [0.25,0.75]^2 x [0.5,1]
    a, b, zt = 0.25, 0.75, 0.5
    patches = [
        _rect([0, 0, 0], [1, 0, 0], [0, 1, 0]),                  # base bottom
        _rect([0, 0, 0], [0, 0, zt], [1, 0, 0]),                 # base y = 0
        _rect([0, 1, 0], [1, 0, 0], [0, 0, zt]),                 # base y = 1
        _rect([0, 0, 0], [0, 1, 0], [0, 0, zt]),                 # base x = 0
        _rect([1, 0, 0], [0, 0, zt], [0, 1, 0]),                 # base x = 1
        # base top frame around the tower footprint
        _rect([0, 0, zt], [0, 1, 0], [a, 0, 0]),
        _rect([b, 0, zt], [0, 1, 0], [1 - b, 0, 0]),
        _rect([a, 0, zt], [b - a, 0, 0], [0, a, 0]),
        _rect([a, b, zt], [b - a, 0, 0], [0, 1 - b, 0]),
        # tower sides and top
        _rect([a, a, zt], [0, 0, 0.5], [b - a, 0, 0]),
        _rect([a, b, zt], [b - a, 0, 0], [0, 0, 0.5]),
        _rect([a, a, zt], [0, b - a, 0], [0, 0, 0.5]),
        _rect([b, a, zt], [0, 0, 0.5], [0, b - a, 0]),
        _rect([a, a, 1], [b - a, 0, 0], [0, b - a, 0]),
    ]
    edges = []
    # base box edges
    for z in (0, zt):
        edges += [_seg([0, 0, z], [1, 0, z]), _seg([0, 1, z], [1, 1, z]),
                  _seg([0, 0, z], [0, 1, z]), _seg([1, 0, z], [1, 1, z])]
    edges += [_seg([x, y, 0], [x, y, zt]) for x in (0, 1) for y in (0, 1)]
    # tower footprint creases, vertical edges, top square
    for z in (zt, 1):
        edges += [_seg([a, a, z], [b, a, z]), _seg([a, b, z], [b, b, z]),
                  _seg([a, a, z], [a, b, z]), _seg([b, a, z], [b, b, z])]
    edges += [_seg([x, y, zt], [x, y, 1]) for x in (a, b) for y in (a, b)]
    return patches, Wireframe(edges=edges)


_GEOMETRY = {
    "cube": _cube_geometry,
    "box-with-slot": _box_with_slot_geometry,
    "cylinder": _cylinder_geometry,
    "two-box-union": _two_box_union_geometry,
}


def _sample_patch(patch, n, rng):
    if patch["kind"] == "rect":
        uv = rng.random((n, 2))
        pts = patch["o"] + np.outer(uv[:, 0], patch["e1"]) + np.outer(uv[:, 1], patch["e2"])
        normals = np.tile(patch["n"], (n, 1))
    elif patch["kind"] == "disk":
        u = rng.random(n)
        ang = 2 * np.pi * rng.random(n)
        r = patch["r"] * np.sqrt(u)
        b1, b2 = _plane_basis(patch["n"])
        pts = patch["c"] + np.outer(r * np.cos(ang), b1) + np.outer(r * np.sin(ang), b2)
        normals = np.tile(patch["n"] / np.linalg.norm(patch["n"]), (n, 1))
    else:  # cylinder side
        ang = 2 * np.pi * rng.random(n)
        t = rng.random(n)
        axis = patch["axis"]
        b1, b2 = _plane_basis(axis)
        radial = np.outer(np.cos(ang), b1) + np.outer(np.sin(ang), b2)
        pts = patch["c"] + patch["r"] * radial + np.outer(t, axis)
        normals = radial
    return pts, normals


def generate_synthetic(spec: SyntheticSpec) -> tuple[PointCloud, Wireframe]:
    """Deterministic surface sampling with noise and hole removals."""
    rng = np.random.default_rng(spec.seed)
    patches, wire = _GEOMETRY[spec.shape]()
    all_pts, all_normals = [], []
    for patch in patches:
        n = int(round(spec.density * patch["area"]))
        if n <= 0:
            continue
        pts, normals = _sample_patch(patch, n, rng)
        all_pts.append(pts)
        all_normals.append(normals)
    pts = np.vstack(all_pts)
    normals = np.vstack(all_normals)

    keep = np.ones(len(pts), dtype=bool)
    for center, radius in spec.holes:
        center = np.asarray(center, dtype=float)
        keep &= np.linalg.norm(pts - center, axis=1) >= radius
    if not keep.any():
        raise EmptyCloudError("hole removals deleted every sample")
    pts, normals = pts[keep], normals[keep]

    if spec.noise > 0:
        diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        pts = pts + normals * rng.normal(0.0, spec.noise * diag, len(pts))[:, None]
    return PointCloud(pts, normals), wire
