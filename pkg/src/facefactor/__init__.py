"""Disentangled identity/expression generative model for 3D face shapes."""

from .bundle import BundleError, ModelBundle, load_bundle, save_bundle
from .data import (FaceDataset, FaceSample, ManifestError,
                   NormalizationRecord, denormalize, load_dataset, normalize,
                   save_dataset)
from .gan import EmbeddingGAN, LatentCode
from .mesh import Mesh, read_obj, write_obj
from .sae import EmbeddingPair, FaceAutoencoder
from .synthesis import (BatchSpec, InterpolationPath, batch_generate,
                        generate, interpolate, mix_expressions, set_intensity,
                        style_edit)
from .synthetic import GroundTruthFactors, SyntheticSpec, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "BatchSpec",
    "BundleError",
    "EmbeddingGAN",
    "EmbeddingPair",
    "FaceAutoencoder",
    "FaceDataset",
    "FaceSample",
    "GroundTruthFactors",
    "InterpolationPath",
    "LatentCode",
    "ManifestError",
    "Mesh",
    "ModelBundle",
    "NormalizationRecord",
    "SyntheticSpec",
    "batch_generate",
    "denormalize",
    "generate",
    "generate_synthetic",
    "interpolate",
    "load_bundle",
    "load_dataset",
    "mix_expressions",
    "normalize",
    "read_obj",
    "save_bundle",
    "save_dataset",
    "set_intensity",
    "style_edit",
    "write_obj",
]
