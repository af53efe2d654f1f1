"""Dataset model, manifest I/O, normalization and the synthetic generator."""

import json

import numpy as np
import pytest

from facefactor.data import (FaceDataset, ManifestError, load_dataset,
                             normalize, save_dataset)
from facefactor.mesh import write_obj
from facefactor.synthetic import SyntheticSpec, generate_synthetic
from facefactor.validation import one_hot

SMALL = SyntheticSpec(v=24, n_id=3, n_exp=2, samples_per_cell=2, k_id=2,
                      noise_sigma=0.1, cross_strength=0.3, seed=5)


@pytest.fixture(scope="module")
def small():
    return generate_synthetic(SMALL)


class TestSynthetic:
    def test_deterministic_across_runs(self):
        a, _ = generate_synthetic(SMALL)
        b, _ = generate_synthetic(SMALL)
        assert a.vertices.tobytes() == b.vertices.tobytes()
        assert np.array_equal(a.identity_labels, b.identity_labels)

    def test_zero_sigma_cell_is_constant(self):
        spec = SyntheticSpec(v=24, n_id=2, n_exp=2, samples_per_cell=3,
                             k_id=2, noise_sigma=0.0, seed=1)
        ds, _ = generate_synthetic(spec)
        for i in range(2):
            for e in range(2):
                sel = (ds.identity_labels == i) & (ds.expression_codes[:, e] == 1)
                cell = ds.vertices[sel]
                assert len(cell) == 3
                assert np.all(cell[0] == cell[1]) and np.all(cell[1] == cell[2])

    def test_zero_cross_term_shares_expression_displacement(self):
        spec = SyntheticSpec(v=24, n_id=3, n_exp=2, samples_per_cell=1,
                             k_id=2, noise_sigma=0.0, cross_strength=0.0,
                             seed=2)
        _, gt = generate_synthetic(spec)
        w = one_hot(1, 2)
        d0 = gt.expression_displacement(0, w)
        for i in (1, 2):
            np.testing.assert_array_equal(gt.expression_displacement(i, w), d0)

    def test_doubling_weight_doubles_displacement(self):
        spec = SyntheticSpec(v=24, n_id=2, n_exp=2, samples_per_cell=1,
                             k_id=2, noise_sigma=0.0, cross_strength=0.0,
                             seed=3)
        _, gt = generate_synthetic(spec)
        d1 = gt.expression_displacement(0, one_hot(0, 2))
        d2 = gt.expression_displacement(0, 2.0 * one_hot(0, 2))
        np.testing.assert_allclose(np.linalg.norm(d2),
                                   2.0 * np.linalg.norm(d1), rtol=1e-12)

    def test_ground_truth_reconstructs_samples(self, small):
        ds, gt = small
        for idx in (0, 5, len(ds) - 1):
            i = int(ds.identity_labels[idx])
            v = gt.sample_vertices(i, ds.expression_codes[idx],
                                   gt.noise[idx])
            np.testing.assert_array_equal(v, ds.vertices[idx])

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic(SyntheticSpec(v=0))
        with pytest.raises(ValueError):
            generate_synthetic(SyntheticSpec(noise_sigma=-1.0))


class TestNormalize:
    def test_idempotent(self, small):
        ds, _ = small
        once, _ = normalize(ds)
        twice, _ = normalize(once)
        np.testing.assert_allclose(twice.vertices, once.vertices, atol=1e-12)

    def test_translation_invariant(self, small):
        ds, _ = small
        shifted = ds.subset(np.arange(len(ds)))
        shifted.vertices = ds.vertices + np.array([10.0, -4.0, 2.5])
        a, _ = normalize(ds)
        b, _ = normalize(shifted)
        np.testing.assert_allclose(a.vertices, b.vertices, atol=1e-12)

    def test_round_trip(self, small):
        ds, _ = small
        normed, record = normalize(ds)
        back = record.invert(normed.vertices)
        np.testing.assert_allclose(back, ds.vertices, atol=1e-10)

    def test_normalized_statistics(self, small):
        ds, _ = small
        normed, _ = normalize(ds)
        pts = normed.vertices.reshape(-1, 3)
        np.testing.assert_allclose(pts.mean(axis=0), 0.0, atol=1e-12)
        rms = np.sqrt((pts ** 2).sum(axis=1).mean())
        np.testing.assert_allclose(rms, 1.0, rtol=1e-12)

    def test_degenerate_rejected(self):
        ds = FaceDataset(
            vertices=np.zeros((2, 3, 3)),
            faces=np.array([[0, 1, 2]]),
            identity_labels=np.zeros(2, dtype=int),
            expression_codes=np.ones((2, 1)),
            n_id=1, n_exp=1,
        )
        with pytest.raises(ValueError):
            normalize(ds)


class TestManifestIO:
    def test_save_load_bit_identical(self, small, tmp_path):
        ds, _ = small
        manifest = save_dataset(ds, tmp_path / "d")
        loaded = load_dataset(manifest)
        assert loaded.vertices.tobytes() == ds.vertices.tobytes()
        assert np.array_equal(loaded.faces, ds.faces)
        assert np.array_equal(loaded.identity_labels, ds.identity_labels)
        assert loaded.expression_codes.tobytes() == ds.expression_codes.tobytes()
        assert loaded.topology_id == ds.topology_id

    def test_empty_manifest_gives_empty_dataset(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({
            "version": 1, "n_id": 4, "n_exp": 2, "units": "mm", "samples": [],
        }))
        ds = load_dataset(path)
        assert len(ds) == 0
        assert ds.n_id == 4

    def test_vertex_count_mismatch_raises(self, small, tmp_path):
        ds, _ = small
        manifest_path = save_dataset(ds, tmp_path / "d")
        # corrupt one mesh with a wrong vertex count
        from facefactor.mesh import Mesh
        bad = Mesh(np.zeros((5, 3)), np.array([[0, 1, 2]]))
        write_obj(bad, tmp_path / "d" / "meshes" / "s000001.obj")
        with pytest.raises(ManifestError, match="mismatch"):
            load_dataset(manifest_path)

    def test_missing_file_raises(self, small, tmp_path):
        ds, _ = small
        manifest_path = save_dataset(ds, tmp_path / "d")
        (tmp_path / "d" / "meshes" / "s000000.obj").unlink()
        with pytest.raises(ManifestError, match="missing"):
            load_dataset(manifest_path)

    def test_label_out_of_range_raises(self, small, tmp_path):
        ds, _ = small
        manifest_path = save_dataset(ds, tmp_path / "d")
        manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
        manifest["samples"][0]["id"] = 99
        (tmp_path / "d" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ManifestError, match="out of range"):
            load_dataset(manifest_path)

    def test_normalization_record_round_trips(self, small, tmp_path):
        ds, _ = small
        normed, record = normalize(ds)
        manifest = save_dataset(normed, tmp_path / "d")
        loaded = load_dataset(manifest)
        assert loaded.normalization is not None
        np.testing.assert_array_equal(loaded.normalization.centroid,
                                      record.centroid)
        assert loaded.normalization.scale == record.scale


class TestLabels:
    def test_one_hot_labels_extracted(self, small):
        ds, _ = small
        y = ds.labels()
        assert y.shape == (len(ds), 2)
        assert y[:, 1].max() == ds.n_exp - 1

    def test_non_one_hot_codes_rejected(self, small):
        ds, _ = small
        ds2 = ds.subset(np.arange(4))
        ds2.expression_codes = ds2.expression_codes * 0.5
        with pytest.raises(ValueError, match="one-hot"):
            ds2.expression_labels()
