"""Finite-difference verification of analytic gradients.

Central differences over a random subsample of parameters, run on a 64-bit
copy of the network so the comparison has numeric headroom.
"""
from __future__ import annotations

import numpy as np


def relative_error(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def gradient_check(net, x, loss_head, num_samples=200, step=1e-5, seed=0):
    """Max relative error between analytic and central-difference gradients.

    loss_head maps the network output to (scalar loss, d loss / d output).
    The network should be float64 (see Network.astype); num_samples parameter
    coordinates are sampled without replacement (all of them if fewer exist).
    """
    x = np.asarray(x, dtype=net.dtype)
    out, caches = net.forward(x)
    _, grad_out = loss_head(out)
    grads, _ = net.backward(caches, grad_out)

    coords = []
    for li, params in enumerate(net.params):
        if params is None:
            continue
        for pi, arr in enumerate(params):
            coords.extend((li, pi, flat) for flat in range(arr.size))
    rng = np.random.default_rng(seed)
    if len(coords) > num_samples:
        picked = rng.choice(len(coords), size=num_samples, replace=False)
        coords = [coords[i] for i in picked]

    worst = 0.0
    for li, pi, flat in coords:
        arr = net.params[li][pi]
        original = arr.flat[flat]
        arr.flat[flat] = original + step
        plus, _ = loss_head(net.forward(x)[0])
        arr.flat[flat] = original - step
        minus, _ = loss_head(net.forward(x)[0])
        arr.flat[flat] = original
        fd = (plus - minus) / (2.0 * step)
        analytic = grads[li][pi].flat[flat]
        worst = max(worst, relative_error(float(analytic), float(fd)))
    return worst
