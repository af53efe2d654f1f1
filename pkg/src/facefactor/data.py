"""Dataset model: labeled fixed-topology mesh collections.

A dataset is a stack of vertex arrays over one shared topology plus an
identity label and an expression-intensity code per sample. On disk it is a
JSON manifest referencing one OBJ file per sample:

    {"version": 1, "n_id": ..., "n_exp": ..., "units": "mm",
     "expression_names": [...], "normalization": null | {...},
     "samples": [{"path": "meshes/s000000.obj", "id": 0, "exp": [..]}]}
"""

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .mesh import Mesh, read_obj, topology_hash, write_obj
from .validation import as_f64, check_finite, check_labels

MANIFEST_VERSION = 1


class ManifestError(ValueError):
    """Raised when a dataset manifest or its mesh files are inconsistent."""


@dataclass
class NormalizationRecord:
    centroid: np.ndarray        # (3,)
    scale: float                # global RMS vertex norm before normalizing

    def to_dict(self):
        return {"centroid": [float(c) for c in self.centroid],
                "scale": float(self.scale)}

    @classmethod
    def from_dict(cls, d):
        return cls(centroid=as_f64(d["centroid"]), scale=float(d["scale"]))

    def apply(self, vertices):
        return (vertices - self.centroid) / self.scale

    def invert(self, vertices):
        return vertices * self.scale + self.centroid


@dataclass
class FaceSample:
    mesh: Mesh
    identity_label: int
    expression_code: np.ndarray


@dataclass
class FaceDataset:
    vertices: np.ndarray            # (n, V, 3)
    faces: np.ndarray               # (F, 3)
    identity_labels: np.ndarray     # (n,)
    expression_codes: np.ndarray    # (n, n_exp)
    n_id: int
    n_exp: int
    units: str = "mm"
    expression_names: tuple = ()
    normalization: NormalizationRecord | None = None
    topology_id: str = ""

    def __post_init__(self):
        self.vertices = as_f64(self.vertices)
        check_finite(self.vertices, "dataset vertices")
        self.identity_labels = check_labels(self.identity_labels, self.n_id,
                                            "identity labels")
        self.expression_codes = as_f64(self.expression_codes)
        if self.expression_codes.shape != (len(self.vertices), self.n_exp):
            raise ValueError(
                f"expression codes shape {self.expression_codes.shape} != "
                f"({len(self.vertices)}, {self.n_exp})"
            )
        if not self.expression_names:
            self.expression_names = tuple(f"exp-{e:02d}" for e in range(self.n_exp))
        if not self.topology_id:
            self.topology_id = topology_hash(self.vertices.shape[1], self.faces)

    def __len__(self):
        return self.vertices.shape[0]

    @property
    def n_vertices(self):
        return self.vertices.shape[1]

    def sample(self, i) -> FaceSample:
        return FaceSample(
            mesh=Mesh(self.vertices[i], self.faces, self.topology_id),
            identity_label=int(self.identity_labels[i]),
            expression_code=self.expression_codes[i],
        )

    def mesh(self, i) -> Mesh:
        return Mesh(self.vertices[i], self.faces, self.topology_id)

    def flat(self):
        """Flattened (n, 3V) view used as model input."""
        n = len(self)
        return self.vertices.reshape(n, -1)

    def expression_labels(self):
        """Argmax class per sample; requires strictly one-hot codes."""
        codes = self.expression_codes
        is_hot = (np.isclose(codes, 1.0).sum(axis=1) == 1) & (
            np.isclose(codes, 0.0).sum(axis=1) == self.n_exp - 1
        )
        if not np.all(is_hot):
            bad = int(np.flatnonzero(~is_hot)[0])
            raise ValueError(f"expression code of sample {bad} is not one-hot")
        return codes.argmax(axis=1).astype(np.int64)

    def labels(self):
        """(n, 2) int array of [identity, expression] class labels."""
        return np.stack([self.identity_labels, self.expression_labels()], axis=1)

    def subset(self, indices):
        indices = np.asarray(indices)
        return replace(
            self,
            vertices=self.vertices[indices],
            identity_labels=self.identity_labels[indices],
            expression_codes=self.expression_codes[indices],
        )


def normalize(dataset: FaceDataset):
    """Center the global centroid and scale RMS vertex norm to 1.

    Returns (normalized dataset, record); the record inverts exactly.
    """
    if len(dataset) == 0:
        raise ValueError("cannot normalize an empty dataset")
    pts = dataset.vertices.reshape(-1, 3)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    scale = float(np.sqrt((centered ** 2).sum(axis=1).mean()))
    if scale == 0.0:
        raise ValueError("degenerate dataset: all vertices identical")
    record = NormalizationRecord(centroid=centroid, scale=scale)
    return replace(
        dataset,
        vertices=record.apply(dataset.vertices),
        units="normalized",
        normalization=record,
    ), record


def denormalize(dataset: FaceDataset, record: NormalizationRecord | None = None):
    record = record or dataset.normalization
    if record is None:
        raise ValueError("dataset carries no normalization record")
    return replace(
        dataset,
        vertices=record.invert(dataset.vertices),
        units="mm",
        normalization=None,
    )


def save_dataset(dataset: FaceDataset, out_dir, mesh_precision=None):
    """Write manifest + one OBJ per sample; returns the manifest path.

    Default precision ``None`` writes exact floats so that a load after save
    reproduces vertex arrays bit-identically.
    """
    out_dir = str(out_dir)
    mesh_dir = os.path.join(out_dir, "meshes")
    os.makedirs(mesh_dir, exist_ok=True)
    samples = []
    for i in range(len(dataset)):
        rel = os.path.join("meshes", f"s{i:06d}.obj")
        write_obj(dataset.mesh(i), os.path.join(out_dir, rel),
                  precision=mesh_precision)
        samples.append({
            "path": rel,
            "id": int(dataset.identity_labels[i]),
            "exp": [float(w) for w in dataset.expression_codes[i]],
        })
    manifest = {
        "version": MANIFEST_VERSION,
        "n_id": dataset.n_id,
        "n_exp": dataset.n_exp,
        "units": dataset.units,
        "expression_names": list(dataset.expression_names),
        "normalization": (dataset.normalization.to_dict()
                          if dataset.normalization else None),
        "samples": samples,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def load_dataset(manifest_path) -> FaceDataset:
    """Load a manifest; fails loudly on any invariant violation."""
    manifest_path = str(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    for key in ("n_id", "n_exp", "units", "samples"):
        if key not in manifest:
            raise ManifestError(f"manifest missing required field {key!r}")
    base = os.path.dirname(manifest_path)
    n_id = int(manifest["n_id"])
    n_exp = int(manifest["n_exp"])
    entries = manifest["samples"]

    vertices = []
    ids = []
    codes = []
    faces = None
    topo = None
    for i, entry in enumerate(entries):
        path = os.path.join(base, entry["path"])
        if not os.path.exists(path):
            raise ManifestError(f"sample {i}: mesh file missing: {path}")
        mesh = read_obj(path)
        if faces is None:
            faces = mesh.faces
            topo = mesh.topology_id
        elif mesh.topology_id != topo:
            raise ManifestError(
                f"sample {i}: vertex count/topology mismatch "
                f"({mesh.n_vertices} vertices vs {len(vertices[0])})"
            )
        label = int(entry["id"])
        if not 0 <= label < n_id:
            raise ManifestError(f"sample {i}: identity label {label} out of "
                                f"range [0, {n_id})")
        code = as_f64(entry["exp"])
        if code.shape != (n_exp,):
            raise ManifestError(f"sample {i}: expression code length "
                                f"{code.shape[0]} != n_exp {n_exp}")
        vertices.append(mesh.vertices)
        ids.append(label)
        codes.append(code)

    if not entries:
        vertices = np.zeros((0, 0, 3))
        faces = np.zeros((0, 3), dtype=np.int64)
        ids = np.zeros(0, dtype=np.int64)
        codes = np.zeros((0, n_exp))

    norm = manifest.get("normalization")
    return FaceDataset(
        vertices=np.asarray(vertices),
        faces=faces,
        identity_labels=np.asarray(ids, dtype=np.int64),
        expression_codes=np.asarray(codes),
        n_id=n_id,
        n_exp=n_exp,
        units=manifest["units"],
        expression_names=tuple(manifest.get("expression_names") or ()),
        normalization=(NormalizationRecord.from_dict(norm) if norm else None),
    )
