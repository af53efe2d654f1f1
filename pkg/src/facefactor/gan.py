"""Conditional GAN over the autoencoder's embedding space.

Two parameter-disjoint generators sample the identity and expression
subspaces; the expression generator is additionally conditioned on the
identity code so identity-specific expression detail stays controllable. A
single discriminator trunk feeds three heads: real/fake source, identity
class, expression class. The discriminator ascends

    L_s + L_id + L_exp

(source log-likelihood plus both class log-likelihoods, each with a real
and a fake term); the identity generator descends ``L_s - L_id`` and the
expression generator descends ``L_s - L_exp``, with the generator source
term in the standard non-saturating form. Each generator is updated only
with gradients of its own objective with respect to its own parameters.

Identity codes come in two modes: ``gaussian`` draws a fixed N(0,1) code
per training identity (fresh draws give novel identities at inference);
``one_hot`` uses one-hot class codes.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .checkpoint import load_checkpoint, save_checkpoint
from .losses import mean_log_sigmoid, sigmoid, softmax, softmax_cross_entropy
from .nn import DenseNet
from .optim import Adam
from .sae import EmbeddingPair, _one_hot_rows, spec_param_names
from .validation import as_f64, check_expression_code, one_hot

ID_MODES = ("gaussian", "one_hot")


@dataclass
class LatentCode:
    """Generator inputs.

    ``z_id_style`` is normally None (the expression generator sees the same
    identity code as the identity generator); style editing sets it to a
    donor identity code, which changes expression detail while leaving the
    generated identity embedding untouched.
    """

    z_id: np.ndarray
    z_exp: np.ndarray
    z_noise: np.ndarray
    z_id_style: np.ndarray | None = None

    def __post_init__(self):
        self.z_id = as_f64(self.z_id)
        self.z_exp = as_f64(self.z_exp)
        self.z_noise = as_f64(self.z_noise)
        if self.z_id_style is not None:
            self.z_id_style = as_f64(self.z_id_style)

    def style_source(self):
        return self.z_id if self.z_id_style is None else self.z_id_style

    def replace(self, **kw):
        d = self.to_dict()
        d.update({k: v for k, v in kw.items()})
        return LatentCode(
            z_id=d["z_id"], z_exp=d["z_exp"], z_noise=d["z_noise"],
            z_id_style=d.get("z_id_style"),
        )

    def to_dict(self):
        d = {
            "z_id": [float(x) for x in self.z_id],
            "z_exp": [float(x) for x in self.z_exp],
            "z_noise": [float(x) for x in self.z_noise],
        }
        if self.z_id_style is not None:
            d["z_id_style"] = [float(x) for x in self.z_id_style]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            z_id=d["z_id"], z_exp=d["z_exp"], z_noise=d["z_noise"],
            z_id_style=d.get("z_id_style"),
        )


def stack_codes(codes):
    """(Z_id, Z_exp, Z_noise, Z_style) matrices from a list of LatentCodes."""
    z_id = np.stack([c.z_id for c in codes])
    z_exp = np.stack([c.z_exp for c in codes])
    z_noise = np.stack([c.z_noise for c in codes])
    z_style = np.stack([c.style_source() for c in codes])
    return z_id, z_exp, z_noise, z_style


class EmbeddingGAN(BaseEstimator):
    """Latent-space conditional GAN; ``fit`` consumes SAE embeddings.

    ``X`` is the (n, id_dim + exp_dim) real embedding matrix, ``y`` the
    (n, 2) integer [identity, expression] labels of the encoded samples.
    """

    def __init__(
        self,
        id_dim=100,
        exp_dim=30,
        z_id_dim=20,
        z_noise_dim=5,
        id_mode="gaussian",
        g_hidden=(512, 512, 1024),
        d_hidden=(1024, 512, 256),
        steps=2000,
        batch_size=64,
        lr_g=1e-4,
        lr_d=1e-4,
        beta1=0.5,
        beta2=0.999,
        d_steps=1,
        seed=0,
        log_every=100,
    ):
        self.id_dim = id_dim
        self.exp_dim = exp_dim
        self.z_id_dim = z_id_dim
        self.z_noise_dim = z_noise_dim
        self.id_mode = id_mode
        self.g_hidden = g_hidden
        self.d_hidden = d_hidden
        self.steps = steps
        self.batch_size = batch_size
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.beta1 = beta1
        self.beta2 = beta2
        self.d_steps = d_steps
        self.seed = seed
        self.log_every = log_every

    # -- construction ------------------------------------------------------

    def _build(self, n_id, n_exp, rng):
        if self.id_mode not in ID_MODES:
            raise ValueError(f"unknown id_mode {self.id_mode!r}")
        self.n_id_ = n_id
        self.n_exp_ = n_exp
        self.z_id_dim_ = n_id if self.id_mode == "one_hot" else self.z_id_dim
        g = list(self.g_hidden)
        d = list(self.d_hidden)
        self.g_id_ = DenseNet.from_dims(
            [self.z_id_dim_ + self.z_noise_dim, *g, self.id_dim], rng
        )
        self.g_exp_ = DenseNet.from_dims(
            [self.z_id_dim_ + n_exp + self.z_noise_dim, *g, self.exp_dim], rng
        )
        # trunk keeps its activation on the last layer; heads are linear
        self.d_common_ = DenseNet.from_dims(
            [self.id_dim + self.exp_dim, *d], rng,
            final_activation="leaky_relu",
        )
        self.d_source_ = DenseNet.from_dims([d[-1], 1], rng)
        self.d_id_ = DenseNet.from_dims([d[-1], n_id], rng)
        self.d_exp_ = DenseNet.from_dims([d[-1], n_exp], rng)
        if self.id_mode == "one_hot":
            self.id_code_table_ = np.eye(n_id)
        else:
            self.id_code_table_ = rng.standard_normal((n_id, self.z_id_dim_))

    def _nets(self):
        return [
            ("g_id", self.g_id_),
            ("g_exp", self.g_exp_),
            ("d_common", self.d_common_),
            ("d_source", self.d_source_),
            ("d_id", self.d_id_),
            ("d_exp", self.d_exp_),
        ]

    def _d_params(self):
        return (self.d_common_.params() + self.d_source_.params()
                + self.d_id_.params() + self.d_exp_.params())

    # -- forwards ----------------------------------------------------------

    def generate_identity(self, z_noise, z_id):
        """mu'_id from (identity code, noise)."""
        check_is_fitted(self, "g_id_")
        return self.g_id_.forward(np.concatenate([z_id, z_noise], axis=-1))

    def generate_expression(self, z_noise, z_id, z_exp):
        """mu'_exp from (identity code, expression code, noise)."""
        check_is_fitted(self, "g_exp_")
        return self.g_exp_.forward(
            np.concatenate([z_id, z_exp, z_noise], axis=-1)
        )

    def generate(self, codes) -> EmbeddingPair:
        """Batched embedding generation from a list of LatentCodes."""
        z_id, z_exp, z_noise, z_style = stack_codes(codes)
        return EmbeddingPair(
            self.generate_identity(z_noise, z_id),
            self.generate_expression(z_noise, z_style, z_exp),
        )

    def discriminate(self, mu):
        """(source_logit, id_logits, exp_logits) from concatenated mu."""
        check_is_fitted(self, "d_common_")
        h = self.d_common_.forward(mu)
        src = self.d_source_.forward(h)
        return src[..., 0], self.d_id_.forward(h), self.d_exp_.forward(h)

    # -- losses ------------------------------------------------------------

    def loss_terms(self, real_mu, real_y, codes, code_y):
        """Objective values on a fixed batch.

        Returns the source/class log-likelihood terms (real + fake, higher
        is better for the discriminator), the discriminator loss (their
        negated sum) and both generator losses (non-saturating source term
        plus own-class term on fakes).
        """
        real_mu = as_f64(real_mu)
        if len(real_mu) == 0 or len(codes) == 0:
            raise ValueError("empty batch")
        real_y = np.asarray(real_y)
        code_y = np.asarray(code_y)
        fake = self.generate(codes)
        fake_mu = fake.concat()

        u_real, id_r, exp_r = self.discriminate(real_mu)
        u_fake, id_f, exp_f = self.discriminate(fake_mu)

        ls_real, _ = mean_log_sigmoid(u_real, positive=True)
        ls_fake, _ = mean_log_sigmoid(u_fake, positive=False)
        ce = softmax_cross_entropy
        lid_real = -ce(id_r, _one_hot_rows(real_y[:, 0], self.n_id_))[0]
        lid_fake = -ce(id_f, _one_hot_rows(code_y[:, 0], self.n_id_))[0]
        lexp_real = -ce(exp_r, _one_hot_rows(real_y[:, 1], self.n_exp_))[0]
        lexp_fake = -ce(exp_f, _one_hot_rows(code_y[:, 1], self.n_exp_))[0]

        l_s = ls_real + ls_fake
        l_id = lid_real + lid_fake
        l_exp = lexp_real + lexp_fake
        g_source, _ = mean_log_sigmoid(u_fake, positive=True)
        return {
            "l_s": l_s,
            "l_id": l_id,
            "l_exp": l_exp,
            "d_loss": -(l_s + l_id + l_exp),
            "g_id_loss": -(g_source + lid_fake),
            "g_exp_loss": -(g_source + lexp_fake),
        }

    def _d_backward(self, trace_pack, up_source, up_id, up_exp):
        """Head upstreams -> (trunk+head grads, grad at the 130-d input)."""
        h_tr, s_tr, i_tr, e_tr = trace_pack
        gs, gh_s = self.d_source_.backward(s_tr, up_source)
        gi, gh_i = self.d_id_.backward(i_tr, up_id)
        ge, gh_e = self.d_exp_.backward(e_tr, up_exp)
        gc, g_in = self.d_common_.backward(h_tr, gh_s + gh_i + gh_e)
        return gc + gs + gi + ge, g_in

    def _d_forward_trace(self, mu):
        h, h_tr = self.d_common_.forward_trace(mu)
        u, s_tr = self.d_source_.forward_trace(h)
        id_logits, i_tr = self.d_id_.forward_trace(h)
        exp_logits, e_tr = self.d_exp_.forward_trace(h)
        return (u[..., 0], id_logits, exp_logits), (h_tr, s_tr, i_tr, e_tr)

    def d_loss_and_grads(self, real_mu, real_y, fake_mu, code_y):
        """Discriminator loss and gradients w.r.t. discriminator params."""
        real_y = np.asarray(real_y)
        code_y = np.asarray(code_y)
        (u_r, id_r, exp_r), tr_r = self._d_forward_trace(real_mu)
        (u_f, id_f, exp_f), tr_f = self._d_forward_trace(fake_mu)

        ls_real, g_ur = mean_log_sigmoid(u_r, positive=True)
        ls_fake, g_uf = mean_log_sigmoid(u_f, positive=False)
        ce_id_r, g_id_r = softmax_cross_entropy(
            id_r, _one_hot_rows(real_y[:, 0], self.n_id_))
        ce_id_f, g_id_f = softmax_cross_entropy(
            id_f, _one_hot_rows(code_y[:, 0], self.n_id_))
        ce_exp_r, g_exp_r = softmax_cross_entropy(
            exp_r, _one_hot_rows(real_y[:, 1], self.n_exp_))
        ce_exp_f, g_exp_f = softmax_cross_entropy(
            exp_f, _one_hot_rows(code_y[:, 1], self.n_exp_))

        # d_loss = -ls_real - ls_fake + all four cross-entropies
        grads_r, _ = self._d_backward(tr_r, -g_ur[:, None], g_id_r, g_exp_r)
        grads_f, _ = self._d_backward(tr_f, -g_uf[:, None], g_id_f, g_exp_f)
        grads = [a + b for a, b in zip(grads_r, grads_f)]
        d_loss = (-ls_real - ls_fake + ce_id_r + ce_id_f
                  + ce_exp_r + ce_exp_f)
        terms = {
            "d_loss": d_loss,
            "l_s": ls_real + ls_fake,
            "l_id": -(ce_id_r + ce_id_f),
            "l_exp": -(ce_exp_r + ce_exp_f),
        }
        return terms, grads

    def g_loss_and_grads(self, codes, code_y):
        """Both generator losses and per-generator parameter gradients.

        The class term of each loss flows only into its own generator: the
        identity generator sees d(L_s - L_id)/d(theta_gid), the expression
        generator d(L_s - L_exp)/d(theta_gexp).
        """
        code_y = np.asarray(code_y)
        z_id, z_exp, z_noise, z_style = stack_codes(codes)
        in_id = np.concatenate([z_id, z_noise], axis=1)
        in_exp = np.concatenate([z_style, z_exp, z_noise], axis=1)
        mu_id, tr_gid = self.g_id_.forward_trace(in_id)
        mu_exp, tr_gexp = self.g_exp_.forward_trace(in_exp)
        mu = np.concatenate([mu_id, mu_exp], axis=1)
        (u, id_logits, exp_logits), tr_d = self._d_forward_trace(mu)

        g_source, g_u = mean_log_sigmoid(u, positive=True)
        ce_id, g_id_logits = softmax_cross_entropy(
            id_logits, _one_hot_rows(code_y[:, 0], self.n_id_))
        ce_exp, g_exp_logits = softmax_cross_entropy(
            exp_logits, _one_hot_rows(code_y[:, 1], self.n_exp_))

        zeros_id = np.zeros_like(g_id_logits)
        zeros_exp = np.zeros_like(g_exp_logits)
        # g_id_loss = -g_source + ce_id(fakes)
        _, g_in = self._d_backward(tr_d, -g_u[:, None], g_id_logits, zeros_exp)
        gid_grads, _ = self.g_id_.backward(tr_gid, g_in[:, : self.id_dim])
        # g_exp_loss = -g_source + ce_exp(fakes)
        _, g_in = self._d_backward(tr_d, -g_u[:, None], zeros_id, g_exp_logits)
        gexp_grads, _ = self.g_exp_.backward(tr_gexp, g_in[:, self.id_dim:])

        terms = {
            "g_id_loss": -g_source + ce_id,
            "g_exp_loss": -g_source + ce_exp,
            "fake_id_acc": float(
                (id_logits.argmax(axis=1) == code_y[:, 0]).mean()),
            "fake_exp_acc": float(
                (exp_logits.argmax(axis=1) == code_y[:, 1]).mean()),
        }
        return terms, gid_grads, gexp_grads

    # -- sampling ----------------------------------------------------------

    def sample_code(self, rng, id_spec=None, exp_spec=None) -> LatentCode:
        """Draw a latent code.

        ``id_spec``: None for a fresh identity draw (Gaussian, or a random
        class in one-hot mode), an int for that training identity's fixed
        code, or an explicit vector. ``exp_spec``: None for a uniform random
        one-hot expression, an int class, or an explicit weight vector.
        """
        check_is_fitted(self, "g_id_")
        if id_spec is None:
            if self.id_mode == "one_hot":
                z_id = self.id_code_table_[int(rng.integers(self.n_id_))].copy()
            else:
                z_id = rng.standard_normal(self.z_id_dim_)
        elif np.isscalar(id_spec):
            z_id = self.id_code_table_[int(id_spec)].copy()
        else:
            z_id = as_f64(id_spec)
            if z_id.shape != (self.z_id_dim_,):
                raise ValueError(
                    f"z_id length {z_id.shape} != ({self.z_id_dim_},)")
        if exp_spec is None:
            z_exp = one_hot(int(rng.integers(self.n_exp_)), self.n_exp_)
        elif np.isscalar(exp_spec):
            z_exp = one_hot(int(exp_spec), self.n_exp_)
        else:
            z_exp = check_expression_code(exp_spec, self.n_exp_)
        return LatentCode(
            z_id=z_id,
            z_exp=z_exp,
            z_noise=rng.standard_normal(self.z_noise_dim),
        )

    def _training_codes(self, rng, n):
        ks = rng.integers(self.n_id_, size=n)
        es = rng.integers(self.n_exp_, size=n)
        codes = [
            LatentCode(
                z_id=self.id_code_table_[k].copy(),
                z_exp=one_hot(int(e), self.n_exp_),
                z_noise=rng.standard_normal(self.z_noise_dim),
            )
            for k, e in zip(ks, es)
        ]
        labels = np.stack([ks, es], axis=1).astype(np.int64)
        return codes, labels

    # -- training ----------------------------------------------------------

    def fit(self, X, y):
        X = as_f64(X)
        if X.ndim != 2 or X.shape[1] != self.id_dim + self.exp_dim:
            raise ValueError(
                f"X must be (n, {self.id_dim + self.exp_dim}) embeddings"
            )
        y = np.asarray(y)
        if y.shape != (len(X), 2):
            raise ValueError("y must be (n_samples, 2) [identity, expression]")
        rng = np.random.default_rng(self.seed)
        self._build(int(y[:, 0].max()) + 1, int(y[:, 1].max()) + 1, rng)

        opt_d = Adam(self._d_params(), lr=self.lr_d, beta1=self.beta1,
                     beta2=self.beta2)
        opt_gid = Adam(self.g_id_.params(), lr=self.lr_g, beta1=self.beta1,
                       beta2=self.beta2)
        opt_gexp = Adam(self.g_exp_.params(), lr=self.lr_g, beta1=self.beta1,
                        beta2=self.beta2)

        self.history_ = []
        for step in range(self.steps):
            for _ in range(self.d_steps):
                idx = rng.integers(len(X), size=self.batch_size)
                codes, code_y = self._training_codes(rng, self.batch_size)
                fake_mu = self.generate(codes).concat()
                d_terms, d_grads = self.d_loss_and_grads(
                    X[idx], y[idx], fake_mu, code_y)
                opt_d.step(d_grads)
            codes, code_y = self._training_codes(rng, self.batch_size)
            g_terms, gid_grads, gexp_grads = self.g_loss_and_grads(
                codes, code_y)
            opt_gid.step(gid_grads)
            opt_gexp.step(gexp_grads)
            if step % self.log_every == 0 or step == self.steps - 1:
                row = {"step": step}
                row.update(d_terms)
                row.update(g_terms)
                self.history_.append(row)
        return self

    # -- persistence -------------------------------------------------------

    def save(self, path):
        check_is_fitted(self, "g_id_")
        meta = {
            "params": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in self.get_params().items()},
            "fitted": {
                "n_id": self.n_id_,
                "n_exp": self.n_exp_,
                "z_id_dim": self.z_id_dim_,
                "z_noise_dim": self.z_noise_dim,
                "id_mode": self.id_mode,
            },
            "arch": {name: net.spec() for name, net in self._nets()},
        }
        named = []
        for prefix, net in self._nets():
            named.extend(zip(net.param_names(prefix + "."), net.params()))
        named.append(("id_code_table", self.id_code_table_))
        save_checkpoint(path, "gan", meta, named)

    @classmethod
    def load(cls, path):
        kind, meta, params = load_checkpoint(path)
        if kind != "gan":
            raise ValueError(f"{path} holds a {kind!r} checkpoint")
        kwargs = {k: (tuple(v) if isinstance(v, list) else v)
                  for k, v in meta["params"].items()}
        model = cls(**kwargs)
        fitted = meta["fitted"]
        model.n_id_ = fitted["n_id"]
        model.n_exp_ = fitted["n_exp"]
        model.z_id_dim_ = fitted["z_id_dim"]
        for name, attr in [("g_id", "g_id_"), ("g_exp", "g_exp_"),
                           ("d_common", "d_common_"), ("d_source", "d_source_"),
                           ("d_id", "d_id_"), ("d_exp", "d_exp_")]:
            spec = meta["arch"][name]
            arrays = [params[k] for k in spec_param_names(spec, name + ".")]
            setattr(model, attr, DenseNet.from_spec(spec, arrays))
        model.id_code_table_ = params["id_code_table"]
        return model
