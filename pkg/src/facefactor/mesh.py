"""Fixed-topology triangle mesh and plain-text OBJ I/O.

All meshes in one dataset share a topology: identical vertex count and face
list. The topology id is a content hash over (vertex count, face indices) so
that samples from different datasets cannot be silently mixed.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .validation import as_f64, check_finite


def topology_hash(n_vertices, faces):
    h = hashlib.sha256()
    h.update(f"v{int(n_vertices)}:".encode())
    h.update(np.ascontiguousarray(faces, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


@dataclass
class Mesh:
    vertices: np.ndarray          # (V, 3) float64
    faces: np.ndarray             # (F, 3) int, 0-based
    topology_id: str = ""

    def __post_init__(self):
        self.vertices = as_f64(self.vertices)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError(f"vertices must be (V, 3), got {self.vertices.shape}")
        check_finite(self.vertices, "vertices")
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError(f"faces must be (F, 3), got {self.faces.shape}")
        if self.faces.size and (self.faces.min() < 0
                                or self.faces.max() >= len(self.vertices)):
            raise ValueError("face index out of range for vertex count")
        if not self.topology_id:
            self.topology_id = topology_hash(len(self.vertices), self.faces)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]


def _fmt(value, precision):
    if precision is None:
        return repr(float(value))      # shortest exact round-trip
    return format(float(value), f".{precision}g")


def write_obj(mesh: Mesh, path, precision=9):
    """Write "v x y z" / "f i j k" lines (1-based faces).

    ``precision`` is significant digits; ``None`` writes exact
    round-trippable floats (used by dataset serialization).
    """
    lines = []
    for v in mesh.vertices:
        lines.append(
            f"v {_fmt(v[0], precision)} {_fmt(v[1], precision)} "
            f"{_fmt(v[2], precision)}"
        )
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def read_obj(path) -> Mesh:
    vertices = []
    faces = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                vertices.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:4]]
                faces.append(idx)
    if not vertices:
        raise ValueError(f"no vertices found in {path}")
    return Mesh(
        vertices=np.array(vertices, dtype=np.float64),
        faces=np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def grid_faces(rows, cols):
    """Triangulation of a rows x cols vertex grid (two triangles per cell)."""
    faces = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            a = r * cols + c
            b = a + 1
            d = a + cols
            e = d + 1
            faces.append([a, b, e])
            faces.append([a, e, d])
    return np.array(faces, dtype=np.int64)
