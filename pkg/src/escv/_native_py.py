"""Numpy fallback for the compiled rollout kernels (same signatures)."""

import numpy as np


def mlp2_forward(x, w1, b1, w2, b2, w3, b3, h1, h2, mean):
    """Two-hidden-layer relu MLP forward; writes post-relu activations and mean."""
    np.dot(w1, x, out=h1)
    h1 += b1
    np.maximum(h1, 0.0, out=h1)
    np.dot(w2, h1, out=h2)
    h2 += b2
    np.maximum(h2, 0.0, out=h2)
    np.dot(w3, h2, out=mean)
    mean += b3


def mlp2_backward(x, h1, h2, w2, w3, delta, grad):
    """Gradient of delta^T mean wrt the MLP parameters, written flat into grad.

    Layout: [w1 | b1 | w2 | b2 | w3 | b3], each weight block row-major.
    """
    n_in = x.shape[0]
    n1 = h1.shape[0]
    n2 = h2.shape[0]
    k = delta.shape[0]
    dz2 = (w3.T @ delta) * (h2 > 0.0)
    dz1 = (w2.T @ dz2) * (h1 > 0.0)
    o = 0
    np.multiply.outer(dz1, x, out=grad[o : o + n1 * n_in].reshape(n1, n_in))
    o += n1 * n_in
    grad[o : o + n1] = dz1
    o += n1
    np.multiply.outer(dz2, h1, out=grad[o : o + n2 * n1].reshape(n2, n1))
    o += n2 * n1
    grad[o : o + n2] = dz2
    o += n2
    np.multiply.outer(delta, h2, out=grad[o : o + k * n2].reshape(k, n2))
    o += k * n2
    grad[o : o + k] = delta
