"""Point cloud loading, spatial indexing, and surface variation analysis.

The variation sigma of a point is the ratio of the smallest eigenvalue of its
neighborhood covariance to the eigenvalue sum.  It is 0 on flat regions and
approaches 1/3 where the neighborhood is fully isotropic, which makes it a
scale-invariant detector for crease and corner points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import struct

import numpy as np
from scipy.spatial import cKDTree


class MalformedRecordError(ValueError):
    """A point file record that cannot be parsed; carries the 1-based line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class EmptyCloudError(ValueError):
    pass


@dataclass
class PointCloud:
    """Immutable 3D sample set with optional unit normals."""

    points: np.ndarray                  # (n, 3) float64
    normals: np.ndarray | None = None   # (n, 3) float64, unit length
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)
    _median_spacing: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise EmptyCloudError("point cloud must be a non-empty (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            nrm = np.ascontiguousarray(np.asarray(self.normals, dtype=np.float64))
            if nrm.shape != pts.shape:
                raise ValueError("normal count does not match point count")
            lengths = np.linalg.norm(nrm, axis=1)
            if np.any(lengths < 1e-12):
                raise ValueError("zero-length normal")
            nrm = nrm / lengths[:, None]
            nrm.setflags(write=False)
            object.__setattr__(self, "normals", nrm)

    def __len__(self):
        return len(self.points)

    @property
    def bbox_diagonal(self) -> float:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            object.__setattr__(self, "_tree", cKDTree(self.points))
        return self._tree

    def median_spacing(self) -> float:
        """Median nearest-neighbor distance, the cloud's natural length unit."""
        if self._median_spacing is None:
            if len(self.points) < 2:
                object.__setattr__(self, "_median_spacing", 0.0)
            else:
                d, _ = self.tree.query(self.points, k=2)
                object.__setattr__(self, "_median_spacing", float(np.median(d[:, 1])))
        return self._median_spacing


@dataclass
class NeighborhoodStats:
    """Covariance eigen-decomposition of one point neighborhood."""

    eigenvalues: np.ndarray    # (3,) ascending, >= 0
    eigenvectors: np.ndarray   # (3, 3) columns, orthonormal
    centroid: np.ndarray       # (3,)


@dataclass
class FeaturePointSet:
    """Cloud indices whose surface variation exceeds the detection threshold."""

    indices: np.ndarray       # (m,) int, unique, sorted
    variations: np.ndarray    # (m,) sigma of each selected index
    threshold: float
    k: int

    def __len__(self):
        return len(self.indices)

    def positions(self, cloud: PointCloud) -> np.ndarray:
        return cloud.points[self.indices]


def load_point_cloud(path, fmt: str | None = None) -> PointCloud:
    """Load a cloud from an xyz or ply file; fmt defaults to the file extension."""
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt == "xyz":
        return _load_xyz(path)
    if fmt == "ply":
        return _load_ply(path)
    raise ValueError(f"unsupported point cloud format: {fmt!r}")


def _load_xyz(path: Path) -> PointCloud:
    points, normals = [], []
    ncols = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) not in (3, 6):
                raise MalformedRecordError(path, line_no, f"expected 3 or 6 columns, got {len(tokens)}")
            if ncols is None:
                ncols = len(tokens)
            elif len(tokens) != ncols:
                raise MalformedRecordError(path, line_no, "inconsistent column count")
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise MalformedRecordError(path, line_no, f"non-numeric token in {tokens!r}") from None
            points.append(values[:3])
            if ncols == 6:
                normals.append(values[3:])
    if not points:
        raise EmptyCloudError(f"{path}: no points")
    return PointCloud(np.array(points), np.array(normals) if normals else None)


def save_xyz(path, cloud: PointCloud) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if cloud.normals is not None:
            for p, n in zip(cloud.points, cloud.normals):
                fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g} {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
        else:
            for p in cloud.points:
                fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")


_PLY_TYPES = {
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
    "uchar": ("B", 1), "uint8": ("B", 1), "char": ("b", 1), "int8": ("b", 1),
    "short": ("h", 2), "int16": ("h", 2), "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4), "uint": ("I", 4), "uint32": ("I", 4),
}


def _load_ply(path: Path) -> PointCloud:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"ply":
            raise MalformedRecordError(path, 1, "missing 'ply' magic")
        fmt = None
        elements = []  # (name, count, [(prop_name, type_code)])
        line_no = 1
        while True:
            raw = fh.readline()
            line_no += 1
            if not raw:
                raise MalformedRecordError(path, line_no, "unterminated header")
            line = raw.decode("ascii", errors="replace").strip()
            if line.startswith("comment") or not line:
                continue
            if line.startswith("format"):
                fmt = line.split()[1]
            elif line.startswith("element"):
                _, name, count = line.split()
                elements.append((name, int(count), []))
            elif line.startswith("property"):
                parts = line.split()
                if parts[1] == "list":
                    elements[-1][2].append((parts[-1], "list", parts[2], parts[3]))
                else:
                    elements[-1][2].append((parts[-1], parts[1]))
            elif line == "end_header":
                break
        if fmt not in ("ascii", "binary_little_endian"):
            raise MalformedRecordError(path, line_no, f"unsupported ply format {fmt!r}")
        if not elements or elements[0][0] != "vertex":
            raise MalformedRecordError(path, line_no, "first ply element must be 'vertex'")
        name, count, props = elements[0]
        prop_names = [p[0] for p in props]
        if any(p[1] == "list" for p in props):
            raise MalformedRecordError(path, line_no, "list property in vertex element")
        for axis in ("x", "y", "z"):
            if axis not in prop_names:
                raise MalformedRecordError(path, line_no, f"vertex element lacks property {axis!r}")
        has_normals = all(a in prop_names for a in ("nx", "ny", "nz"))

        if fmt == "ascii":
            rows = []
            for i in range(count):
                raw = fh.readline()
                line_no += 1
                tokens = raw.split()
                if len(tokens) != len(props):
                    raise MalformedRecordError(path, line_no, f"expected {len(props)} values, got {len(tokens)}")
                try:
                    rows.append([float(t) for t in tokens])
                except ValueError:
                    raise MalformedRecordError(path, line_no, "non-numeric vertex value") from None
            data = np.array(rows, dtype=np.float64).reshape(count, len(props))
        else:
            codes = [_PLY_TYPES[p[1]][0] for p in props]
            rec = struct.Struct("<" + "".join(codes))
            buf = fh.read(rec.size * count)
            if len(buf) < rec.size * count:
                raise MalformedRecordError(path, line_no, "truncated binary vertex data")
            data = np.array([rec.unpack_from(buf, i * rec.size) for i in range(count)], dtype=np.float64)
            data = data.reshape(count, len(props))

    if count == 0:
        raise EmptyCloudError(f"{path}: ply file has no vertices")
    cols = {nm: data[:, i] for i, nm in enumerate(prop_names)}
    points = np.column_stack([cols["x"], cols["y"], cols["z"]])
    normals = np.column_stack([cols["nx"], cols["ny"], cols["nz"]]) if has_normals else None
    return PointCloud(points, normals)


def save_ply(path, cloud: PointCloud, binary: bool = True) -> None:
    """Write a ply file (binary little-endian by default) with optional normals."""
    n = len(cloud)
    props = ["x", "y", "z"] + (["nx", "ny", "nz"] if cloud.normals is not None else [])
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {n}"]
    header += [f"property float {p}" for p in props]
    header.append("end_header")
    data = cloud.points if cloud.normals is None else np.hstack([cloud.points, cloud.normals])
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(data.astype("<f4").tobytes())
        else:
            for row in data:
                fh.write((" ".join(f"{v:.9g}" for v in row) + "\n").encode("ascii"))


def neighborhood(cloud: PointCloud, query: int, k: int) -> NeighborhoodStats:
    """Covariance statistics of the k nearest points to cloud point `query`.

    The query point itself counts as one of the k (it is its own nearest
    neighbor at distance zero).
    """
    n = len(cloud)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for cloud of {n} points")
    _, idx = cloud.tree.query(cloud.points[query], k=k)
    idx = np.atleast_1d(idx)
    return neighborhood_of_points(cloud.points[idx])


def neighborhood_of_points(pts: np.ndarray) -> NeighborhoodStats:
    """Covariance eigen-analysis of an explicit point set."""
    pts = np.asarray(pts, dtype=np.float64)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    return NeighborhoodStats(eigenvalues, eigenvectors, centroid)


def surface_variation(stats: NeighborhoodStats) -> float:
    """sigma = smallest eigenvalue over eigenvalue sum, in [0, 1/3]."""
    total = float(stats.eigenvalues.sum())
    if total <= 0.0:
        return 0.0
    return float(stats.eigenvalues[0] / total)


def all_variations(cloud: PointCloud, k: int) -> np.ndarray:
    """Surface variation of every cloud point (vectorized over the whole cloud)."""
    n = len(cloud)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for cloud of {n} points")
    _, idx = cloud.tree.query(cloud.points, k=k)
    nbrs = cloud.points[idx]                       # (n, k, 3)
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    eig = np.linalg.eigvalsh(cov)                  # ascending
    eig = np.clip(eig, 0.0, None)
    total = eig.sum(axis=1)
    sigma = np.zeros(n)
    ok = total > 0
    sigma[ok] = eig[ok, 0] / total[ok]
    return sigma


def detect_feature_points(cloud: PointCloud, k: int, sigma_t: float) -> FeaturePointSet:
    """Select all points with variation strictly above sigma_t."""
    sigma = all_variations(cloud, k)
    mask = sigma > sigma_t
    indices = np.flatnonzero(mask)
    return FeaturePointSet(indices=indices, variations=sigma[indices], threshold=sigma_t, k=k)
