"""Dense-network numerical core.

Float64 throughout: the models here are small enough that precision is worth
more than speed, and the gradient checks in :mod:`facefactor.gradcheck`
require it. A network is a plain stack of affine layers with either a
leaky-ReLU (slope 0.2) or identity activation; forward and backward passes
are hand-rolled on numpy arrays and accept either a single vector or a
``(batch, dim)`` matrix.
"""

import numpy as np

from .validation import as_f64, check_finite

LEAKY_SLOPE = 0.2

ACTIVATIONS = ("leaky_relu", "identity")


def leaky_relu(z):
    return np.where(z > 0.0, z, LEAKY_SLOPE * z)


def leaky_relu_grad(z):
    return np.where(z > 0.0, 1.0, LEAKY_SLOPE)


def _apply_activation(name, z):
    if name == "leaky_relu":
        return leaky_relu(z)
    return z


def _activation_grad(name, z):
    if name == "leaky_relu":
        return leaky_relu_grad(z)
    return np.ones_like(z)


class DenseLayer:
    """Affine map ``y = act(x @ W.T + b)`` with weight shape (out, in)."""

    def __init__(self, weight, bias=None, activation="identity"):
        self.weight = as_f64(weight)
        if self.weight.ndim != 2:
            raise ValueError("weight must be a 2-d matrix (out, in)")
        if bias is not None:
            bias = as_f64(bias)
            if bias.shape != (self.weight.shape[0],):
                raise ValueError(
                    f"bias shape {bias.shape} does not match out dim "
                    f"{self.weight.shape[0]}"
                )
        self.bias = bias
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def pre_activation(self, x):
        z = x @ self.weight.T
        if self.bias is not None:
            z = z + self.bias
        return z

    def params(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]

    def set_params(self, arrays):
        self.weight = arrays[0]
        if self.bias is not None:
            self.bias = arrays[1]


class DenseNet:
    """Ordered stack of DenseLayers with chained dimensions."""

    def __init__(self, layers):
        if not layers:
            raise ValueError("DenseNet needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        self.layers = list(layers)

    @classmethod
    def from_dims(
        cls,
        dims,
        rng=None,
        hidden_activation="leaky_relu",
        final_activation="identity",
        bias=True,
        final_bias=True,
    ):
        """Build a net with uniform(+-1/sqrt(fan_in)) weights and zero biases.

        ``rng=None`` gives all-zero weights, which is occasionally useful in
        tests as the exactly-known zero map.
        """
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        layers = []
        last = len(dims) - 2
        for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
            if rng is None:
                w = np.zeros((d_out, d_in))
            else:
                limit = 1.0 / np.sqrt(d_in)
                w = rng.uniform(-limit, limit, size=(d_out, d_in))
            act = final_activation if i == last else hidden_activation
            use_bias = final_bias if i == last else bias
            b = np.zeros(d_out) if use_bias else None
            layers.append(DenseLayer(w, b, act))
        return cls(layers)

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def param_names(self, prefix=""):
        names = []
        for i, layer in enumerate(self.layers):
            names.append(f"{prefix}w{i}")
            if layer.bias is not None:
                names.append(f"{prefix}b{i}")
        return names

    def spec(self):
        """Architecture description sufficient to rebuild the net."""
        return {
            "dims": [self.input_dim] + [l.out_dim for l in self.layers],
            "activations": [l.activation for l in self.layers],
            "biases": [l.bias is not None for l in self.layers],
        }

    @classmethod
    def from_spec(cls, spec, arrays):
        """Rebuild from :meth:`spec` and a flat list of parameter arrays."""
        dims = spec["dims"]
        layers = []
        it = iter(arrays)
        for i, act in enumerate(spec["activations"]):
            w = next(it)
            b = next(it) if spec["biases"][i] else None
            if w.shape != (dims[i + 1], dims[i]):
                raise ValueError(
                    f"checkpoint weight shape {w.shape} does not match spec "
                    f"({dims[i + 1]}, {dims[i]})"
                )
            layers.append(DenseLayer(w, b, act))
        return cls(layers)

    def forward(self, x):
        """Pure function of (params, x); raises on non-finite output."""
        x, squeeze = _as_batch(x, self.input_dim)
        for layer in self.layers:
            x = _apply_activation(layer.activation, layer.pre_activation(x))
        check_finite(x, "forward output")
        return x[0] if squeeze else x

    def forward_trace(self, x):
        """Forward pass keeping per-layer inputs and pre-activations."""
        x, squeeze = _as_batch(x, self.input_dim)
        trace = []
        for layer in self.layers:
            z = layer.pre_activation(x)
            trace.append((x, z))
            x = _apply_activation(layer.activation, z)
        check_finite(x, "forward output")
        return (x[0] if squeeze else x), (trace, squeeze)

    def backward(self, trace, grad_out):
        """Backprop; returns (param grads aligned with params(), input grad)."""
        steps, squeeze = trace
        grad_out = as_f64(grad_out)
        if grad_out.ndim == 1:
            grad_out = grad_out[None, :]
        if grad_out.shape[1] != self.output_dim:
            raise ValueError(
                f"upstream grad dim {grad_out.shape[1]} != output dim "
                f"{self.output_dim}"
            )
        grads = []
        g = grad_out
        for layer, (x_in, z) in zip(reversed(self.layers), reversed(steps)):
            dz = g * _activation_grad(layer.activation, z)
            dw = dz.T @ x_in
            layer_grads = [dw]
            if layer.bias is not None:
                layer_grads.append(dz.sum(axis=0))
            grads.append(layer_grads)
            g = dz @ layer.weight
        flat = []
        for layer_grads in reversed(grads):
            flat.extend(layer_grads)
        return flat, (g[0] if squeeze else g)


def _as_batch(x, dim):
    x = as_f64(x)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ValueError(f"input length {x.shape[0]} != expected {dim}")
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise ValueError(f"input width {x.shape[1]} != expected {dim}")
        return x, False
    raise ValueError("input must be a vector or a (batch, dim) matrix")
