"""Independent brute-force references shared across test modules.

Everything here is deliberately written as straight-line loops so it cannot
share a code path (or a bug) with the vectorized implementations under test.
"""

import numpy as np

from facefactor.nn import LEAKY_SLOPE


def dense_net_oracle(net, x):
    """Explicit-loop forward pass through a DenseNet."""
    out = np.array(x, dtype=np.float64)
    for layer in net.layers:
        nxt = np.zeros(layer.out_dim)
        for i in range(layer.out_dim):
            acc = 0.0
            for j in range(layer.in_dim):
                acc += layer.weight[i, j] * out[j]
            if layer.bias is not None:
                acc += layer.bias[i]
            nxt[i] = acc
        if layer.activation == "leaky_relu":
            nxt = np.array([v if v > 0 else LEAKY_SLOPE * v for v in nxt])
        out = nxt
    return out


def mean_vertex_distance_loop(a, b):
    total = 0.0
    for i in range(len(a)):
        d = 0.0
        for k in range(3):
            d += (a[i][k] - b[i][k]) ** 2
        total += np.sqrt(d)
    return total / len(a)


def softmax_loop(logits):
    m = max(logits)
    e = [np.exp(v - m) for v in logits]
    s = sum(e)
    return [v / s for v in e]
