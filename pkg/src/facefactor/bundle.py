"""Deployable model bundle: trained autoencoder + GAN + dataset card.

A bundle directory holds ``bundle.json`` (dataset card, face list,
normalization record) next to the two checkpoints. The content hash over
both checkpoints and the card identifies the bundle to clients, which lets
them detect model swaps mid-session.
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .checkpoint import file_sha256
from .data import NormalizationRecord
from .gan import EmbeddingGAN
from .mesh import topology_hash
from .sae import FaceAutoencoder


class BundleError(ValueError):
    pass


@dataclass
class ModelBundle:
    sae: FaceAutoencoder
    gan: EmbeddingGAN
    faces: np.ndarray
    normalization: NormalizationRecord | None = None
    units: str = "normalized"
    expression_names: tuple = ()
    content_hash: str = ""

    def __post_init__(self):
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        self.validate()
        if not self.expression_names:
            self.expression_names = tuple(
                f"exp-{e:02d}" for e in range(self.n_exp))

    def validate(self):
        sae, gan = self.sae, self.gan
        checks = [
            ("identity embedding dim", sae.id_dim, gan.id_dim),
            ("expression embedding dim", sae.exp_dim, gan.exp_dim),
            ("n_id", sae.n_id_, gan.n_id_),
            ("n_exp", sae.n_exp_, gan.n_exp_),
        ]
        for name, a, b in checks:
            if a != b:
                raise BundleError(
                    f"bundle inconsistency: {name} is {a} in the autoencoder "
                    f"but {b} in the GAN"
                )
        if self.faces.size and self.faces.max() >= self.v:
            raise BundleError(
                f"bundle inconsistency: face index {int(self.faces.max())} "
                f"out of range for {self.v} vertices"
            )

    @property
    def v(self):
        return self.sae.input_dim_ // 3

    @property
    def n_id(self):
        return self.sae.n_id_

    @property
    def n_exp(self):
        return self.sae.n_exp_

    @property
    def topology_id(self):
        return topology_hash(self.v, self.faces)

    def model_card(self):
        return {
            "v": self.v,
            "n_id": self.n_id,
            "n_exp": self.n_exp,
            "z_id_dim": self.gan.z_id_dim_,
            "z_exp_dim": self.n_exp,
            "z_noise_dim": self.gan.z_noise_dim,
            "id_mode": self.gan.id_mode,
            "units": self.units,
            "expression_names": list(self.expression_names),
            "topology_id": self.topology_id,
        }


def save_bundle(bundle: ModelBundle, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    sae_path = os.path.join(out_dir, "sae.ffl")
    gan_path = os.path.join(out_dir, "gan.ffl")
    bundle.sae.save(sae_path)
    bundle.gan.save(gan_path)
    card = {
        "card": bundle.model_card(),
        "faces": bundle.faces.reshape(-1).tolist(),
        "normalization": (bundle.normalization.to_dict()
                          if bundle.normalization else None),
        "sae": "sae.ffl",
        "gan": "gan.ffl",
    }
    card_path = os.path.join(out_dir, "bundle.json")
    with open(card_path, "w") as fh:
        json.dump(card, fh, sort_keys=True)
        fh.write("\n")
    bundle.content_hash = _bundle_hash(out_dir)
    return out_dir


def load_bundle(bundle_dir) -> ModelBundle:
    card_path = os.path.join(bundle_dir, "bundle.json")
    if not os.path.exists(card_path):
        raise BundleError(f"no bundle.json under {bundle_dir}")
    with open(card_path) as fh:
        card = json.load(fh)
    sae = FaceAutoencoder.load(os.path.join(bundle_dir, card["sae"]))
    gan = EmbeddingGAN.load(os.path.join(bundle_dir, card["gan"]))
    norm = card.get("normalization")
    info = card["card"]
    return ModelBundle(
        sae=sae,
        gan=gan,
        faces=np.asarray(card["faces"], dtype=np.int64).reshape(-1, 3),
        normalization=(NormalizationRecord.from_dict(norm) if norm else None),
        units=info.get("units", "normalized"),
        expression_names=tuple(info.get("expression_names") or ()),
        content_hash=_bundle_hash(bundle_dir),
    )


def _bundle_hash(bundle_dir):
    h = hashlib.sha256()
    for name in ("bundle.json", "sae.ffl", "gan.ffl"):
        h.update(file_sha256(os.path.join(bundle_dir, name)).encode())
    return h.hexdigest()[:16]
