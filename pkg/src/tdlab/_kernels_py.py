"""Reference MLP kernels in plain numpy.

The compiled extension in ``_kernels.pyx`` implements the same two entry
points; ``tdlab.backend`` picks whichever is available. Keep the contract
here authoritative: tanh hidden layers, linear output, float64 throughout.
"""

from __future__ import annotations

import numpy as np


def forward(x, weights, biases):
    """Run the MLP on a batch.

    x: (B, n_in) float64. weights[i]: (n_i, n_{i+1}), biases[i]: (n_{i+1},).
    Returns (out, cache) where out is the linear final layer (B, n_out) and
    cache is the list of layer inputs [x, h_1, ..., h_{L-1}] needed by
    backward.
    """
    h = x
    cache = [x]
    last = len(weights) - 1
    out = None
    for i in range(len(weights)):
        z = h @ weights[i] + biases[i]
        if i < last:
            h = np.tanh(z)
            cache.append(h)
        else:
            out = z
    return out, cache


def backward(delta, weights, cache):
    """Backpropagate a gradient through the MLP.

    delta: (B, n_out) gradient of a scalar loss w.r.t. the linear output.
    Returns (weight_grads, bias_grads) matching the shapes of the params.
    """
    n = len(weights)
    gws = [None] * n
    gbs = [None] * n
    d = delta
    for i in range(n - 1, -1, -1):
        gws[i] = cache[i].T @ d
        gbs[i] = d.sum(axis=0)
        if i > 0:
            # tanh'(z) expressed through the stored activation
            d = (d @ weights[i].T) * (1.0 - cache[i] * cache[i])
    return gws, gbs
