"""Independent oracles shared across test modules.

Everything here is written as plainly as possible (scalar loops, direct
formulas) so it cannot share bugs with the vectorized implementations it
checks.
"""
import math

import numpy as np


def naive_conv2d(x, w, b, stride=1):
    """Scalar-loop valid convolution."""
    batch, cin, h, wid = x.shape
    cout, _, k, _ = w.shape
    ho = (h - k) // stride + 1
    wo = (wid - k) // stride + 1
    out = np.zeros((batch, cout, ho, wo))
    for n in range(batch):
        for co in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = b[co]
                    for c in range(cin):
                        for u in range(k):
                            for v in range(k):
                                acc += w[co, c, u, v] * x[n, c, i * stride + u, j * stride + v]
                    out[n, co, i, j] = acc
    return out


def naive_forward(model, batch):
    """Scalar-loop forward pass of the whole classifier."""
    current = batch.astype(np.float64)
    for block, w, b in zip(model.config.blocks, model.conv_w, model.conv_b):
        current = naive_conv2d(current, w, b, block.stride)
        current = np.maximum(current, 0.0)
        if block.pool:
            bsz, ch, h, wid = current.shape
            pooled = np.zeros((bsz, ch, h // 2, wid // 2))
            for n in range(bsz):
                for c in range(ch):
                    for i in range(h // 2):
                        for j in range(wid // 2):
                            pooled[n, c, i, j] = max(
                                current[n, c, 2 * i, 2 * j],
                                current[n, c, 2 * i, 2 * j + 1],
                                current[n, c, 2 * i + 1, 2 * j],
                                current[n, c, 2 * i + 1, 2 * j + 1],
                            )
            current = pooled
    flat = current.reshape(current.shape[0], -1)
    hidden = np.maximum(flat @ model.fc1_w + model.fc1_b, 0.0)
    return hidden @ model.fc2_w + model.fc2_b


def brute_force_gadf(scaled):
    """Trigonometric definition: M[i][j] = sin(arccos(x_i) - arccos(x_j))."""
    n = len(scaled)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = math.sin(math.acos(scaled[i]) - math.acos(scaled[j]))
    return out


def brute_force_match(truth, pred):
    """Exhaustive pairwise overlap matching; returns (tp, fp, fn)."""
    def overlaps(a, b):
        return a[0] < b[1] and b[0] < a[1]

    tp = sum(1 for t in truth if any(overlaps(t, p) for p in pred))
    fn = len(truth) - tp
    fp = sum(1 for p in pred if not any(overlaps(t, p) for t in truth))
    return tp, fp, fn


def random_disjoint_intervals(rng, low, high, max_count):
    """Sorted, disjoint, half-open intervals inside [low, high)."""
    intervals = []
    cursor = low + int(rng.integers(0, 3))
    for _ in range(int(rng.integers(0, max_count + 1))):
        if cursor >= high - 1:
            break
        start = cursor + int(rng.integers(0, 3))
        if start >= high - 1:
            break
        end = start + 1 + int(rng.integers(0, 4))
        end = min(end, high)
        if end <= start:
            break
        intervals.append((start, end))
        cursor = end + int(rng.integers(0, 2))
    return intervals


def central_difference_grads(model, batch, labels, eps=1e-5):
    """Finite-difference gradients of the training loss for every parameter."""
    from tidwatch import cnn

    grads = {}
    for name, tensor in model.parameters():
        grad = np.zeros_like(tensor)
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = tensor[idx]
            tensor[idx] = orig + eps
            loss_plus = cnn.cross_entropy(cnn.forward(model, batch), labels)
            tensor[idx] = orig - eps
            loss_minus = cnn.cross_entropy(cnn.forward(model, batch), labels)
            tensor[idx] = orig
            grad[idx] = (loss_plus - loss_minus) / (2.0 * eps)
        grads[name] = grad
    return grads
