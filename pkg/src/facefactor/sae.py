"""Identity/expression disentangling autoencoder.

Two parameter-disjoint encoders map a flattened vertex array into separate
identity and expression embeddings; one shared decoder reconstructs the
mesh from their concatenation. In supervised mode a bias-free linear
classification head on each embedding is trained jointly with the
reconstruction, which is what pulls same-class samples together in each
subspace; unsupervised mode trains the same architecture on reconstruction
alone (the heads stay at zero) and serves as the comparison baseline.

Loss per batch: mean-abs reconstruction + identity cross-entropy +
expression cross-entropy, each term weighted by ``loss_weights``.
"""

from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .checkpoint import load_checkpoint, save_checkpoint
from .losses import l1_loss, softmax_cross_entropy
from .nn import DenseNet
from .optim import Adam
from .validation import as_f64, check_finite


class EmbeddingPair(NamedTuple):
    """Identity and expression embeddings; batched or single-vector."""

    mu_id: np.ndarray
    mu_exp: np.ndarray

    def concat(self):
        return np.concatenate([self.mu_id, self.mu_exp], axis=-1)

    @classmethod
    def from_concat(cls, mu, id_dim):
        return cls(mu[..., :id_dim], mu[..., id_dim:])


def _one_hot_rows(labels, n_classes):
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


class FaceAutoencoder(BaseEstimator, TransformerMixin):
    """Autoencoder with split identity/expression latent subspaces.

    Parameters mirror the reference architecture: encoders
    ``3V -> hidden_dims -> id_dim/exp_dim`` and a decoder on the
    concatenated embedding with the hidden stack mirrored. ``fit`` expects
    ``X`` of shape (n, 3V) and ``y`` of shape (n, 2) holding integer
    ``[identity, expression]`` class labels per sample.
    """

    def __init__(
        self,
        id_dim=100,
        exp_dim=30,
        hidden_dims=(1024, 512),
        supervised=True,
        epochs=80,
        batch_size=32,
        lr=1e-4,
        lr_schedule="constant",
        beta1=0.9,
        beta2=0.999,
        loss_weights=(1.0, 1.0, 1.0),
        val_fraction=0.15,
        seed=0,
    ):
        self.id_dim = id_dim
        self.exp_dim = exp_dim
        self.hidden_dims = hidden_dims
        self.supervised = supervised
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.lr_schedule = lr_schedule
        self.beta1 = beta1
        self.beta2 = beta2
        self.loss_weights = loss_weights
        self.val_fraction = val_fraction
        self.seed = seed

    # -- construction ------------------------------------------------------

    def _build(self, input_dim, n_id, n_exp, rng):
        hidden = list(self.hidden_dims)
        self.enc_id_ = DenseNet.from_dims([input_dim, *hidden, self.id_dim], rng)
        self.enc_exp_ = DenseNet.from_dims([input_dim, *hidden, self.exp_dim], rng)
        self.dec_ = DenseNet.from_dims(
            [self.id_dim + self.exp_dim, *reversed(hidden), input_dim], rng
        )
        # classification heads are bias-free linear maps on the embeddings
        self.head_id_ = DenseNet.from_dims([self.id_dim, n_id], rng,
                                           final_bias=False)
        self.head_exp_ = DenseNet.from_dims([self.exp_dim, n_exp], rng,
                                            final_bias=False)
        self.input_dim_ = input_dim
        self.n_id_ = n_id
        self.n_exp_ = n_exp

    def _nets(self):
        return [
            ("enc_id", self.enc_id_),
            ("enc_exp", self.enc_exp_),
            ("dec", self.dec_),
            ("head_id", self.head_id_),
            ("head_exp", self.head_exp_),
        ]

    def _params(self):
        out = []
        for _, net in self._nets():
            out.extend(net.params())
        return out

    def _param_names(self):
        names = []
        for prefix, net in self._nets():
            names.extend(net.param_names(prefix + "."))
        return names

    # -- forward / loss ----------------------------------------------------

    def forward(self, X):
        """Returns (EmbeddingPair, reconstruction, id_logits, exp_logits)."""
        check_is_fitted(self, "enc_id_")
        mu_id = self.enc_id_.forward(X)
        mu_exp = self.enc_exp_.forward(X)
        pair = EmbeddingPair(mu_id, mu_exp)
        recon = self.dec_.forward(pair.concat())
        return (
            pair,
            recon,
            self.head_id_.forward(mu_id),
            self.head_exp_.forward(mu_exp),
        )

    def loss_and_grads(self, X, y_id, y_exp):
        """Loss terms and analytic gradients for a labeled batch.

        ``y_id``/``y_exp`` are integer class labels. Returns
        ``(terms, grads)`` with grads aligned with the internal parameter
        order; in unsupervised mode the classification terms are dropped and
        the head gradients are zero.
        """
        X = as_f64(X)
        if X.ndim == 1:
            X = X[None, :]
        y_id = np.asarray(y_id).reshape(-1)
        y_exp = np.asarray(y_exp).reshape(-1)

        mu_id, tr_id = self.enc_id_.forward_trace(X)
        mu_exp, tr_exp = self.enc_exp_.forward_trace(X)
        mu = np.concatenate([mu_id, mu_exp], axis=1)
        recon, tr_dec = self.dec_.forward_trace(mu)

        w_rec, w_id, w_exp = self.loss_weights
        recon_loss, g_recon = l1_loss(recon, X)
        dec_grads, g_mu = self.dec_.backward(tr_dec, w_rec * g_recon)
        g_mu_id = g_mu[:, : self.id_dim]
        g_mu_exp = g_mu[:, self.id_dim:]

        terms = {"recon": recon_loss}
        if self.supervised:
            id_logits, tr_hid = self.head_id_.forward_trace(mu_id)
            exp_logits, tr_hexp = self.head_exp_.forward_trace(mu_exp)
            ce_id, g_id_logits = softmax_cross_entropy(
                id_logits, _one_hot_rows(y_id, self.n_id_)
            )
            ce_exp, g_exp_logits = softmax_cross_entropy(
                exp_logits, _one_hot_rows(y_exp, self.n_exp_)
            )
            hid_grads, g_mu_id_ce = self.head_id_.backward(
                tr_hid, w_id * g_id_logits
            )
            hexp_grads, g_mu_exp_ce = self.head_exp_.backward(
                tr_hexp, w_exp * g_exp_logits
            )
            g_mu_id = g_mu_id + g_mu_id_ce
            g_mu_exp = g_mu_exp + g_mu_exp_ce
            terms["ce_id"] = ce_id
            terms["ce_exp"] = ce_exp
            terms["total"] = w_rec * recon_loss + w_id * ce_id + w_exp * ce_exp
        else:
            hid_grads = [np.zeros_like(p) for p in self.head_id_.params()]
            hexp_grads = [np.zeros_like(p) for p in self.head_exp_.params()]
            terms["total"] = w_rec * recon_loss

        enc_id_grads, _ = self.enc_id_.backward(tr_id, g_mu_id)
        enc_exp_grads, _ = self.enc_exp_.backward(tr_exp, g_mu_exp)

        grads = enc_id_grads + enc_exp_grads + dec_grads + hid_grads + hexp_grads
        return terms, grads

    # -- training ----------------------------------------------------------

    def fit(self, X, y):
        X = as_f64(X)
        check_finite(X, "X")
        if X.ndim != 2:
            raise ValueError("X must be (n_samples, 3V)")
        y = np.asarray(y)
        if y.ndim != 2 or y.shape != (len(X), 2):
            raise ValueError("y must be (n_samples, 2) [identity, expression]")
        if len(X) == 0:
            raise ValueError("empty dataset")
        y_id = y[:, 0].astype(np.int64)
        y_exp = y[:, 1].astype(np.int64)
        n_id = int(y_id.max()) + 1
        n_exp = int(y_exp.max()) + 1
        if y_id.min() < 0 or y_exp.min() < 0:
            raise ValueError("labels must be nonnegative")

        rng = np.random.default_rng(self.seed)
        self._build(X.shape[1], n_id, n_exp, rng)
        train_idx, val_idx = _stratified_split(y_id, self.val_fraction, rng)
        self.train_indices_ = train_idx
        self.val_indices_ = val_idx

        opt = Adam(self._params(), lr=self.lr, beta1=self.beta1,
                   beta2=self.beta2)
        self.history_ = []
        for epoch in range(self.epochs):
            opt.lr = _epoch_lr(self.lr, self.lr_schedule, epoch, self.epochs)
            order = rng.permutation(len(train_idx))
            sums = {}
            seen = 0
            for start in range(0, len(order), self.batch_size):
                batch = train_idx[order[start:start + self.batch_size]]
                terms, grads = self.loss_and_grads(X[batch], y_id[batch],
                                                   y_exp[batch])
                opt.step(grads)
                for k, v in terms.items():
                    sums[k] = sums.get(k, 0.0) + v * len(batch)
                seen += len(batch)
            row = {k: v / seen for k, v in sums.items()}
            row["epoch"] = epoch
            self.history_.append(row)

        self._evaluate_validation(X, y_id, y_exp)
        return self

    def _evaluate_validation(self, X, y_id, y_exp):
        idx = self.val_indices_
        if len(idx) == 0:
            idx = self.train_indices_
        _, recon, id_logits, exp_logits = self.forward(X[idx])
        self.val_recon_l1_ = float(np.abs(recon - X[idx]).mean())
        if self.supervised:
            self.val_id_accuracy_ = float(
                (id_logits.argmax(axis=1) == y_id[idx]).mean()
            )
            self.val_exp_accuracy_ = float(
                (exp_logits.argmax(axis=1) == y_exp[idx]).mean()
            )

    # -- inference ---------------------------------------------------------

    def encode(self, X) -> EmbeddingPair:
        check_is_fitted(self, "enc_id_")
        return EmbeddingPair(self.enc_id_.forward(X), self.enc_exp_.forward(X))

    def decode(self, pair: EmbeddingPair):
        return self.dec_.forward(pair.concat())

    def transform(self, X):
        """Concatenated (n, id_dim + exp_dim) embeddings."""
        return self.encode(X).concat()

    def inverse_transform(self, mu):
        check_is_fitted(self, "dec_")
        return self.dec_.forward(mu)

    def predict(self, X):
        """(n, 2) array of predicted [identity, expression] classes."""
        _, _, id_logits, exp_logits = self.forward(X)
        id_logits = np.atleast_2d(id_logits)
        exp_logits = np.atleast_2d(exp_logits)
        return np.stack(
            [id_logits.argmax(axis=1), exp_logits.argmax(axis=1)], axis=1
        )

    # -- persistence -------------------------------------------------------

    def save(self, path):
        check_is_fitted(self, "enc_id_")
        meta = {
            "params": _plain(self.get_params()),
            "fitted": {
                "input_dim": self.input_dim_,
                "v": self.input_dim_ // 3,
                "n_id": self.n_id_,
                "n_exp": self.n_exp_,
            },
            "arch": {name: net.spec() for name, net in self._nets()},
        }
        named = list(zip(self._param_names(), self._params()))
        save_checkpoint(path, "autoencoder", meta, named)

    @classmethod
    def load(cls, path):
        kind, meta, params = load_checkpoint(path)
        if kind != "autoencoder":
            raise ValueError(f"{path} holds a {kind!r} checkpoint")
        model = cls(**_restore(meta["params"]))
        fitted = meta["fitted"]
        model.input_dim_ = fitted["input_dim"]
        model.n_id_ = fitted["n_id"]
        model.n_exp_ = fitted["n_exp"]
        for name, attr in [("enc_id", "enc_id_"), ("enc_exp", "enc_exp_"),
                           ("dec", "dec_"), ("head_id", "head_id_"),
                           ("head_exp", "head_exp_")]:
            spec = meta["arch"][name]
            arrays = [params[k] for k in spec_param_names(spec, name + ".")]
            setattr(model, attr, DenseNet.from_spec(spec, arrays))
        return model


def spec_param_names(spec, prefix=""):
    """Parameter names in declared (layer-major) order for a net spec."""
    names = []
    for i, has_bias in enumerate(spec["biases"]):
        names.append(f"{prefix}w{i}")
        if has_bias:
            names.append(f"{prefix}b{i}")
    return names


def _plain(params):
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in params.items()}


def _restore(params):
    return {k: (tuple(v) if isinstance(v, list) else v)
            for k, v in params.items()}


def _epoch_lr(lr, schedule, epoch, epochs):
    """Per-epoch learning rate; cosine decays to 1% of the base rate.

    The L1 term keeps gradient magnitudes constant near convergence, so a
    constant-rate Adam dithers at a floor proportional to the rate; decaying
    it is what lets the reconstruction settle.
    """
    if schedule == "constant":
        return lr
    if schedule == "cosine":
        frac = epoch / max(epochs - 1, 1)
        return lr * (0.01 + 0.99 * 0.5 * (1.0 + np.cos(np.pi * frac)))
    raise ValueError(f"unknown lr schedule {schedule!r}")


def _stratified_split(labels, val_fraction, rng):
    """Per-identity random split; every class appears in both halves."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must lie in (0, 1)")
    train, val = [], []
    for cls in range(int(labels.max()) + 1):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_val = int(np.ceil(val_fraction * len(idx)))
        if len(idx) > 1:
            n_val = min(n_val, len(idx) - 1)
        val.extend(idx[:n_val])
        train.extend(idx[n_val:])
    return np.array(sorted(train)), np.array(sorted(val))
