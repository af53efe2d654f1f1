"""Quantitative evaluation of the generative pipeline.

Diversity is the mean vertex distance over random pairs of generated
samples, normalized so the training data scores exactly 1; the controlled
variants vary one latent factor while pinning the others. Specificity is
the distance from generated samples to the training set, in original units,
in two flavors: distance to the nearest training member (default) and the
mean over all training members. Cluster statistics and a 2-D PCA projection
quantify embedding-space structure.

Metric kernels are pure; reductions run in index order (numpy pairwise
summation) so results reproduce across platforms for a fixed (seed, n).
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .gan import LatentCode
from .mesh import Mesh
from .optim import Adam
from .synthesis import BatchSpec, batch_generate
from .validation import as_f64, one_hot

RATIO_CAP = 1e6


# -- distance kernels --------------------------------------------------------

def mean_vertex_distance(a, b):
    """Mean Euclidean distance between corresponding vertices."""
    if isinstance(a, Mesh) and isinstance(b, Mesh):
        if a.topology_id != b.topology_id:
            raise ValueError("topology mismatch between meshes")
        a, b = a.vertices, b.vertices
    a = as_f64(a)
    b = as_f64(b)
    if a.shape != b.shape:
        raise ValueError(f"vertex arrays differ in shape: {a.shape} vs {b.shape}")
    return float(np.sqrt(((a - b) ** 2).sum(axis=-1)).mean())


def _pair_mvd(verts, idx_a, idx_b):
    diff = verts[idx_a] - verts[idx_b]
    return np.sqrt((diff ** 2).sum(axis=-1)).mean(axis=-1)


def sample_pairs(n, n_pairs, rng):
    """Random index pairs, distinct within each pair."""
    if n < 2:
        raise ValueError("need at least 2 samples to form pairs")
    i = rng.integers(n, size=n_pairs)
    j = rng.integers(n - 1, size=n_pairs)
    j = j + (j >= i)
    return i, j


def exhaustive_pairs(n):
    idx = np.triu_indices(n, k=1)
    return idx[0], idx[1]


def raw_diversity(vertices, n_pairs=None, rng=None):
    """Mean pairwise vertex distance; ``n_pairs=None`` uses all pairs."""
    vertices = as_f64(vertices)
    if len(vertices) < 2:
        raise ValueError("diversity needs at least 2 samples")
    if n_pairs is None:
        i, j = exhaustive_pairs(len(vertices))
    else:
        if rng is None:
            raise ValueError("sampled pairs need an rng")
        i, j = sample_pairs(len(vertices), n_pairs, rng)
    return float(_pair_mvd(vertices, i, j).mean())


def diversity(vertices, training_diversity, n_pairs=None, rng=None):
    """Normalized diversity: training data scores exactly 1."""
    if training_diversity <= 0:
        raise ValueError("training diversity must be positive")
    return raw_diversity(vertices, n_pairs, rng) / training_diversity


# -- controlled diversity ----------------------------------------------------

def controlled_training_stat(dataset, mode, n_pairs, rng):
    """Training analogue of a controlled diversity: pairs that share the
    pinned factor's label and differ in the varied one."""
    ids = dataset.identity_labels
    exps = dataset.expression_labels()
    if mode == "vary_id_fix_exp":
        share, differ = exps, ids
    elif mode == "vary_exp_fix_id":
        share, differ = ids, exps
    else:
        raise ValueError(f"unknown mode {mode!r}")
    pairs_a, pairs_b = [], []
    tries = 0
    while len(pairs_a) < n_pairs:
        i, j = sample_pairs(len(dataset), 1, rng)
        i, j = int(i[0]), int(j[0])
        tries += 1
        if share[i] == share[j] and differ[i] != differ[j]:
            pairs_a.append(i)
            pairs_b.append(j)
        if tries > 1000 * n_pairs:
            raise ValueError(f"could not find controlled pairs for {mode}")
    return float(_pair_mvd(dataset.vertices,
                           np.array(pairs_a), np.array(pairs_b)).mean())


def diversity_controlled(bundle, dataset, mode, n_pairs=1000, seed=0,
                         level=1.0):
    """DIV-ID / DIV-EXP: controlled-pair diversity of generated samples.

    ``vary_id_fix_exp`` pairs share z_exp and z_noise and differ in z_id;
    ``vary_exp_fix_id`` pairs share z_id and z_noise and differ in z_exp
    (two distinct classes, both at intensity ``level``). Normalization uses
    the matching controlled statistic of the unextrapolated training data.
    Returns (normalized, details dict with raw values and recorded codes).
    """
    gan = bundle.gan
    rng = np.random.default_rng(seed)
    codes = []
    for _ in range(n_pairs):
        z_noise = rng.standard_normal(gan.z_noise_dim)
        if mode == "vary_id_fix_exp":
            e = int(rng.integers(gan.n_exp_))
            z_exp = level * one_hot(e, gan.n_exp_)
            z_id_a, z_id_b = _two_identity_codes(gan, rng)
            a = LatentCode(z_id=z_id_a, z_exp=z_exp.copy(), z_noise=z_noise)
            b = LatentCode(z_id=z_id_b, z_exp=z_exp.copy(),
                           z_noise=z_noise.copy())
        elif mode == "vary_exp_fix_id":
            z_id = _one_identity_code(gan, rng)
            e_a = int(rng.integers(gan.n_exp_))
            e_b = int(rng.integers(gan.n_exp_ - 1))
            e_b = e_b + (e_b >= e_a)
            a = LatentCode(z_id=z_id, z_exp=level * one_hot(e_a, gan.n_exp_),
                           z_noise=z_noise)
            b = LatentCode(z_id=z_id.copy(),
                           z_exp=level * one_hot(e_b, gan.n_exp_),
                           z_noise=z_noise.copy())
        else:
            raise ValueError(f"unknown mode {mode!r}")
        codes.append((a, b))

    flat = [c for pair in codes for c in pair]
    mu = gan.generate(flat).concat()
    recon = bundle.sae.inverse_transform(mu)
    verts = recon.reshape(len(flat), bundle.v, 3)
    raw = float(_pair_mvd(verts, np.arange(0, len(flat), 2),
                          np.arange(1, len(flat), 2)).mean())
    train_stat = controlled_training_stat(dataset, mode, n_pairs,
                                          np.random.default_rng(seed + 1))
    return raw / train_stat, {
        "raw": raw,
        "training_stat": train_stat,
        "mode": mode,
        "level": level,
        "codes": codes,
    }


def _one_identity_code(gan, rng):
    if gan.id_mode == "one_hot":
        return gan.id_code_table_[int(rng.integers(gan.n_id_))].copy()
    return rng.standard_normal(gan.z_id_dim_)


def _two_identity_codes(gan, rng):
    if gan.id_mode == "one_hot":
        a = int(rng.integers(gan.n_id_))
        b = int(rng.integers(gan.n_id_ - 1))
        b = b + (b >= a)
        return gan.id_code_table_[a].copy(), gan.id_code_table_[b].copy()
    return rng.standard_normal(gan.z_id_dim_), \
        rng.standard_normal(gan.z_id_dim_)


# -- specificity -------------------------------------------------------------

def specificity(generated, training, n=None, mode="nearest", rng=None):
    """Distance from generated samples to the training set.

    ``nearest``: mean over generated samples of the distance to the closest
    training member. ``mean_over_training``: mean over all pairs. ``n``
    caps the number of generated samples used (seeded subsample).
    """
    generated = as_f64(generated)
    training = as_f64(training)
    if len(training) == 0:
        raise ValueError("empty training set")
    if len(generated) == 0:
        raise ValueError("empty generated set")
    if generated.shape[1:] != training.shape[1:]:
        raise ValueError("generated/training vertex arrays differ in shape")
    if n is not None and n < len(generated):
        if rng is None:
            raise ValueError("subsampling needs an rng")
        generated = generated[rng.choice(len(generated), size=n,
                                         replace=False)]
    per_sample = np.empty(len(generated))
    for i, g in enumerate(generated):
        d = np.sqrt(((training - g) ** 2).sum(axis=-1)).mean(axis=-1)
        per_sample[i] = d.min() if mode == "nearest" else d.mean()
    if mode not in ("nearest", "mean_over_training"):
        raise ValueError(f"unknown specificity mode {mode!r}")
    return float(per_sample.mean())


# -- embedding-space statistics ----------------------------------------------

@dataclass
class ClusterStats:
    centroid_distances: np.ndarray     # (K, K) pairwise centroid distances
    mean_intra: float
    mean_nearest_other: float
    separability_ratio: float
    probe_accuracy: float

    def to_dict(self):
        return {
            "mean_intra": self.mean_intra,
            "mean_nearest_other": self.mean_nearest_other,
            "separability_ratio": self.separability_ratio,
            "probe_accuracy": self.probe_accuracy,
        }


def cluster_stats(embeddings, labels, seed=0):
    """Separability statistics plus a one-vs-rest linear-probe accuracy."""
    X = as_f64(embeddings)
    y = np.asarray(labels)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("need at least 2 labels")
    for cls in classes:
        if (y == cls).sum() < 2:
            raise ValueError(f"label {cls} has fewer than 2 samples")

    centroids = np.stack([X[y == cls].mean(axis=0) for cls in classes])
    cd = np.sqrt(((centroids[:, None] - centroids[None]) ** 2).sum(-1))

    cls_index = {c: k for k, c in enumerate(classes)}
    own = centroids[[cls_index[c] for c in y]]
    intra = float(np.sqrt(((X - own) ** 2).sum(axis=1)).mean())

    d_all = np.sqrt(((X[:, None] - centroids[None]) ** 2).sum(-1))
    for i, c in enumerate(y):
        d_all[i, cls_index[c]] = np.inf
    nearest_other = float(d_all.min(axis=1).mean())

    ratio = RATIO_CAP if intra == 0 else min(nearest_other / intra, RATIO_CAP)
    acc = _linear_probe_accuracy(X, y, classes, seed)
    return ClusterStats(cd, intra, nearest_other, ratio, acc)


def _linear_probe_accuracy(X, y, classes, seed, steps=400, lr=0.05):
    """One-vs-rest logistic probe: train on half, evaluate on the other."""
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in classes:
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        half = len(idx) // 2
        train_idx.extend(idx[:half])
        test_idx.extend(idx[half:])
    train_idx = np.array(sorted(train_idx))
    test_idx = np.array(sorted(test_idx))

    mean = X[train_idx].mean(axis=0)
    std = X[train_idx].std(axis=0) + 1e-12
    Xtr = (X[train_idx] - mean) / std
    Xte = (X[test_idx] - mean) / std
    targets = np.stack([(y[train_idx] == cls).astype(np.float64)
                        for cls in classes], axis=1)

    w = np.zeros((len(classes), X.shape[1]))
    b = np.zeros(len(classes))
    opt = Adam([w, b], lr=lr)
    n = len(Xtr)
    for _ in range(steps):
        z = Xtr @ w.T + b
        p = 1.0 / (1.0 + np.exp(-z))
        g = (p - targets) / n
        opt.step([g.T @ Xtr, g.sum(axis=0)])
    pred = (Xte @ w.T + b).argmax(axis=1)
    truth = np.array([np.flatnonzero(classes == c)[0] for c in y[test_idx]])
    return float((pred == truth).mean())


def pca_project_2d(embeddings):
    """Top-2 principal-component coordinates plus their eigenvalues.

    Sign convention: each component's largest-magnitude loading is positive.
    """
    X = as_f64(embeddings)
    if len(X) < 2:
        raise ValueError("need at least 2 samples")
    centered = X - X.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] == 0:
        raise ValueError("rank-0 data: all samples identical")
    n_comp = min(2, (s > 0).sum())
    comps = vt[:2].copy()
    if n_comp < 2:
        comps[1] = 0.0
    for k in range(2):
        j = int(np.argmax(np.abs(comps[k])))
        if comps[k, j] < 0:
            comps[k] = -comps[k]
    coords = centered @ comps.T
    eigenvalues = (s[:2] ** 2) / (len(X) - 1)
    return coords, eigenvalues


def write_projection_csv(path, coords, labels, sample_ids=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "label", "x", "y"])
        for i, (c, lbl) in enumerate(zip(coords, labels)):
            sid = sample_ids[i] if sample_ids is not None else i
            writer.writerow([sid, lbl, repr(float(c[0])), repr(float(c[1]))])


# -- reconstruction report ---------------------------------------------------

def reconstruction_report(sae, dataset, indices=None):
    """Mean/median per-sample mean vertex error of decode(encode(x)).

    Reported in the dataset's units; if the dataset carries a normalization
    record the errors are scaled back to original units.
    """
    idx = np.arange(len(dataset)) if indices is None else np.asarray(indices)
    X = dataset.flat()[idx]
    recon = sae.inverse_transform(sae.transform(X))
    diff = (recon - X).reshape(len(idx), -1, 3)
    per_sample = np.sqrt((diff ** 2).sum(axis=-1)).mean(axis=-1)
    scale = dataset.normalization.scale if dataset.normalization else 1.0
    per_sample = per_sample * scale
    return {
        "mean": float(per_sample.mean()),
        "median": float(np.median(per_sample)),
        "n": int(len(idx)),
        "units": "mm" if dataset.normalization else dataset.units,
    }


# -- top-level report --------------------------------------------------------

@dataclass
class MetricReport:
    div: float
    div_id: float
    div_exp: float
    sp_nearest: float
    sp_mean_over_training: float
    sp_mode: str
    sp_units: str
    n_pairs: int
    n_controlled_pairs: int
    n_specificity: int
    n_generated: int
    seed: int
    id_mode: str
    level: float
    extras: dict = field(default_factory=dict)

    @property
    def sp(self):
        return (self.sp_nearest if self.sp_mode == "nearest"
                else self.sp_mean_over_training)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__
             if k != "extras"}
        d["sp"] = self.sp
        d.update(self.extras)
        return d

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def evaluate_bundle(bundle, dataset, n_generated=1000, n_pairs=10000,
                    n_controlled_pairs=1000, n_specificity=1000, seed=0,
                    level=1.0, sp_mode="nearest"):
    """Full metric pass: DIV, DIV-ID, DIV-EXP and both specificity modes.

    Runs in the dataset's coordinate space; specificity is converted to
    original units via the dataset's normalization record when present.
    """
    rng = np.random.default_rng(seed)
    generated, _ = batch_generate(
        bundle, BatchSpec(count=n_generated, seed=seed + 1, level=level))

    train_div = raw_diversity(dataset.vertices, n_pairs,
                              np.random.default_rng(seed + 2))
    div = diversity(generated.vertices, train_div, n_pairs,
                    np.random.default_rng(seed + 3))
    div_id, id_details = diversity_controlled(
        bundle, dataset, "vary_id_fix_exp", n_controlled_pairs, seed + 4,
        level=level)
    div_exp, exp_details = diversity_controlled(
        bundle, dataset, "vary_exp_fix_id", n_controlled_pairs, seed + 5,
        level=level)

    scale = dataset.normalization.scale if dataset.normalization else 1.0
    sp_units = "mm" if dataset.normalization else dataset.units
    sp_near = scale * specificity(generated.vertices, dataset.vertices,
                                  n=n_specificity, mode="nearest", rng=rng)
    sp_mean = scale * specificity(generated.vertices, dataset.vertices,
                                  n=n_specificity, mode="mean_over_training",
                                  rng=rng)
    return MetricReport(
        div=div,
        div_id=div_id,
        div_exp=div_exp,
        sp_nearest=sp_near,
        sp_mean_over_training=sp_mean,
        sp_mode=sp_mode,
        sp_units=sp_units,
        n_pairs=n_pairs,
        n_controlled_pairs=n_controlled_pairs,
        n_specificity=min(n_specificity, n_generated),
        n_generated=n_generated,
        seed=seed,
        id_mode=bundle.gan.id_mode,
        level=level,
        extras={
            "div_id_raw": id_details["raw"],
            "div_id_training_stat": id_details["training_stat"],
            "div_exp_raw": exp_details["raw"],
            "div_exp_training_stat": exp_details["training_stat"],
            "training_diversity_raw": train_div,
        },
    )
