"""User-facing generative operations on a trained bundle.

All operations are pure functions of (models, code, seed): generation,
linear interpolation between codes, expression-intensity scaling
(extrapolation past the canonical intensity 1), multi-expression mixing,
style editing (donor identity code into the expression generator only) and
seeded batch generation.
"""

from dataclasses import dataclass

import numpy as np

from .bundle import ModelBundle
from .data import FaceDataset
from .gan import LatentCode
from .mesh import Mesh
from .sae import EmbeddingPair
from .validation import as_f64, check_expression_code, one_hot

INTERP_TARGETS = ("z_id", "z_exp", "z_noise")


@dataclass
class InterpolationPath:
    a: LatentCode
    b: LatentCode
    steps: int
    targets: tuple = ("z_id",)

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("interpolation needs at least 2 steps")
        bad = set(self.targets) - set(INTERP_TARGETS)
        if bad:
            raise ValueError(f"unknown interpolation targets {sorted(bad)}")
        for name in INTERP_TARGETS:
            va, vb = getattr(self.a, name), getattr(self.b, name)
            if va.shape != vb.shape:
                raise ValueError(
                    f"endpoint {name} dims differ: {va.shape} vs {vb.shape}")

    def code_at(self, t):
        """Linear blend on targeted components; exact at the endpoints."""
        if t == 0.0:
            return self.a.replace()
        if t == 1.0:
            return self.b.replace()
        kw = {}
        for name in INTERP_TARGETS:
            va, vb = getattr(self.a, name), getattr(self.b, name)
            kw[name] = (1.0 - t) * va + t * vb if name in self.targets else va
        return LatentCode(z_id=kw["z_id"], z_exp=kw["z_exp"],
                          z_noise=kw["z_noise"], z_id_style=self.a.z_id_style)

    def codes(self):
        ts = np.linspace(0.0, 1.0, self.steps)
        return [self.code_at(float(t)) for t in ts]


def embeddings_to_meshes(bundle: ModelBundle, mu, denormalize=False):
    """Decode a (n, id+exp) embedding matrix to a list of meshes."""
    flat = bundle.sae.inverse_transform(mu)
    flat = np.atleast_2d(flat)
    verts = flat.reshape(len(flat), bundle.v, 3)
    if denormalize:
        if bundle.normalization is None:
            raise ValueError("bundle carries no normalization record")
        verts = bundle.normalization.invert(verts)
    return [Mesh(v, bundle.faces, bundle.topology_id) for v in verts]


def generate_batch(bundle: ModelBundle, codes, denormalize=False):
    """(EmbeddingPair batch, list of meshes) for a list of codes."""
    pair = bundle.gan.generate(codes)
    meshes = embeddings_to_meshes(bundle, pair.concat(), denormalize)
    return pair, meshes


def generate(bundle: ModelBundle, code: LatentCode, denormalize=False):
    """Single-code generation: (EmbeddingPair, Mesh)."""
    pair, meshes = generate_batch(bundle, [code], denormalize)
    return EmbeddingPair(pair.mu_id[0], pair.mu_exp[0]), meshes[0]


def interpolate(bundle: ModelBundle, path: InterpolationPath,
                space="code", denormalize=False):
    """Mesh sequence along a linear path.

    ``space="code"`` interpolates generator inputs (default);
    ``space="embedding"`` interpolates the two endpoint embeddings directly
    and decodes each blend.
    """
    if space == "code":
        # frame-by-frame so endpoint frames share the exact call shape
        # (and hence bit pattern) with direct single-code generation
        return [generate(bundle, c, denormalize)[1] for c in path.codes()]
    if space == "embedding":
        mu_a = bundle.gan.generate([path.a]).concat()[0]
        mu_b = bundle.gan.generate([path.b]).concat()[0]
        ts = np.linspace(0.0, 1.0, path.steps)
        mu = np.stack([(1.0 - t) * mu_a + t * mu_b for t in ts])
        return embeddings_to_meshes(bundle, mu, denormalize)
    raise ValueError(f"unknown interpolation space {space!r}")


def set_intensity(code: LatentCode, expression_index, level) -> LatentCode:
    """One-hot expression scaled by ``level`` (0 = neutral direction)."""
    if level < 0:
        raise ValueError("intensity level must be nonnegative")
    n_exp = code.z_exp.shape[0]
    if not 0 <= expression_index < n_exp:
        raise ValueError(f"expression index {expression_index} out of range")
    return code.replace(z_exp=level * one_hot(expression_index, n_exp))


def mix_expressions(code: LatentCode, weights) -> LatentCode:
    """Replace the expression code by an arbitrary nonnegative mix."""
    weights = check_expression_code(weights, code.z_exp.shape[0], "weights")
    return code.replace(z_exp=weights)


def style_edit(code: LatentCode, donor_z_id) -> LatentCode:
    """Feed a donor identity code to the expression generator only."""
    donor = as_f64(donor_z_id)
    if donor.shape != code.z_id.shape:
        raise ValueError(
            f"donor z_id shape {donor.shape} != {code.z_id.shape}")
    return code.replace(z_id_style=donor)


@dataclass
class BatchSpec:
    """Seeded batch-generation policy.

    ``id_policy``: "vary" (fresh identity per sample), "fix" (one shared
    draw) or an int training-identity class. ``exp_policy``: "vary"
    (uniform random one-hot at ``level``), "fix" (one shared random one-hot)
    or an explicit weight vector.
    """

    count: int
    id_policy: object = "vary"
    exp_policy: object = "vary"
    seed: int = 0
    level: float = 1.0


def batch_generate(bundle: ModelBundle, spec: BatchSpec, denormalize=False):
    """Generate a labeled dataset of ``spec.count`` samples plus the codes."""
    if spec.count <= 0:
        raise ValueError("count must be positive")
    gan = bundle.gan
    rng = np.random.default_rng(spec.seed)

    z_ids, id_labels, n_id_out = _identity_draws(gan, spec, rng)
    z_exps, exp_labels = _expression_draws(gan, spec, rng)
    codes = [
        LatentCode(z_id=z_ids[i], z_exp=z_exps[i],
                   z_noise=rng.standard_normal(gan.z_noise_dim))
        for i in range(spec.count)
    ]
    _, meshes = generate_batch(bundle, codes, denormalize)
    dataset = FaceDataset(
        vertices=np.stack([m.vertices for m in meshes]),
        faces=bundle.faces,
        identity_labels=id_labels,
        expression_codes=np.stack(z_exps),
        n_id=n_id_out,
        n_exp=gan.n_exp_,
        units="mm" if denormalize else bundle.units,
        expression_names=bundle.expression_names,
    )
    return dataset, codes


def _identity_draws(gan, spec, rng):
    n = spec.count
    if isinstance(spec.id_policy, (int, np.integer)):
        z = gan.id_code_table_[int(spec.id_policy)]
        return [z.copy() for _ in range(n)], \
            np.full(n, int(spec.id_policy), dtype=np.int64), gan.n_id_
    if spec.id_policy == "fix":
        if gan.id_mode == "one_hot":
            k = int(rng.integers(gan.n_id_))
            return [gan.id_code_table_[k].copy() for _ in range(n)], \
                np.full(n, k, dtype=np.int64), gan.n_id_
        z = rng.standard_normal(gan.z_id_dim_)
        return [z.copy() for _ in range(n)], np.zeros(n, dtype=np.int64), 1
    if spec.id_policy == "vary":
        if gan.id_mode == "one_hot":
            ks = rng.integers(gan.n_id_, size=n)
            return [gan.id_code_table_[k].copy() for k in ks], \
                ks.astype(np.int64), gan.n_id_
        # fresh Gaussian identities have no training class: label by index
        zs = [rng.standard_normal(gan.z_id_dim_) for _ in range(n)]
        return zs, np.arange(n, dtype=np.int64), n
    raise ValueError(f"unknown id_policy {spec.id_policy!r}")


def _expression_draws(gan, spec, rng):
    n = spec.count
    policy = spec.exp_policy
    if isinstance(policy, str):
        if policy == "fix":
            e = int(rng.integers(gan.n_exp_))
            w = spec.level * one_hot(e, gan.n_exp_)
            return [w.copy() for _ in range(n)], np.full(n, e, dtype=np.int64)
        if policy == "vary":
            es = rng.integers(gan.n_exp_, size=n)
            return [spec.level * one_hot(int(e), gan.n_exp_) for e in es], \
                es.astype(np.int64)
        raise ValueError(f"unknown exp_policy {policy!r}")
    w = check_expression_code(policy, gan.n_exp_, "exp_policy weights")
    return [w.copy() for _ in range(n)], np.zeros(n, dtype=np.int64)
