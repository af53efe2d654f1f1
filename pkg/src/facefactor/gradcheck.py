"""Central finite-difference verification of analytic gradients.

The harness is deliberately dumb: it re-evaluates the full loss at
perturbed parameter values and never reuses any quantity from the analytic
path, so it stays an independent oracle for every loss in the package.
"""

import numpy as np


def finite_diff_check(loss_fn, params, h=1e-5, n_coords=250, rng=None):
    """Max relative error between analytic and numeric gradients.

    ``loss_fn()`` evaluates the loss at the current parameter values and
    returns ``(loss, grads)`` with ``grads`` aligned with ``params``. Up to
    ``n_coords`` coordinates are sampled across all parameters (all of them
    when the total count is small enough). Relative error per coordinate is
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)``.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    _, grads = loss_fn()
    coords = _sample_coords(params, n_coords, rng)
    max_err = 0.0
    for p_idx, flat_idx in coords:
        p = params[p_idx]
        flat = p.reshape(-1)
        orig = flat[flat_idx]
        flat[flat_idx] = orig + h
        loss_plus = loss_fn()[0]
        flat[flat_idx] = orig - h
        loss_minus = loss_fn()[0]
        flat[flat_idx] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * h)
        analytic = grads[p_idx].reshape(-1)[flat_idx]
        denom = max(abs(analytic), abs(numeric), 1e-8)
        max_err = max(max_err, abs(analytic - numeric) / denom)
    return max_err


def _sample_coords(params, n_coords, rng):
    sizes = [p.size for p in params]
    total = sum(sizes)
    if total == 0:
        return []
    if total <= n_coords:
        return [(i, j) for i, s in enumerate(sizes) for j in range(s)]
    if rng is None:
        rng = np.random.default_rng(0)
    offsets = np.cumsum([0] + sizes)
    picks = rng.choice(total, size=n_coords, replace=False)
    coords = []
    for g in sorted(picks):
        p_idx = int(np.searchsorted(offsets, g, side="right") - 1)
        coords.append((p_idx, int(g - offsets[p_idx])))
    return coords
