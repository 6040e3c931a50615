"""Pure numpy implementations of the simulation kernels."""

from __future__ import annotations

import numpy as np


def attainability(x_f, x_cf):
    denom = np.abs(x_cf - x_f) * x_cf
    out = np.full(np.broadcast(x_f, x_cf).shape, np.inf)
    nz = denom != 0.0
    out[nz] = 1.0 / denom[nz] - 1.0
    return out


def success_probability(x_f, x_cf, d, beta):
    a = attainability(x_f, x_cf)
    d = np.broadcast_to(d, a.shape)
    out = np.ones(a.shape)
    live = np.isfinite(a) & (d != 0.0)
    out[live] = -np.expm1(-beta * a[live] / d[live])
    return out


def dropout_probability(b, q, rho, chi, omega):
    return -np.expm1(-(rho * b + chi * q + omega * b * q))


def reapply_probability(b, u, nu):
    return (1.0 - u) * np.exp(-nu * b) + u


def attempt_features(x_f, x_cf, mask, d, beta, uniforms):
    """One Bernoulli draw per unimplemented feature; successes jump to ``x_cf``.

    Returns ``(new_x, new_mask, outcome)`` where ``outcome`` is 1 for a
    success, 0 for a failure and -1 where nothing was attempted.
    """
    p = success_probability(x_f, x_cf, d, beta)
    attempted = ~mask
    hit = attempted & (uniforms < p)
    new_x = np.where(hit, x_cf, x_f)
    new_mask = mask | hit
    outcome = np.where(attempted, hit.astype(np.int64), -1)
    return new_x, new_mask, outcome


def gini_pairwise(g):
    g = np.sort(np.asarray(g, dtype=np.float64))
    n = g.size
    ranks = 2.0 * np.arange(1, n + 1) - n - 1.0
    # sum_{i,j} |g_i - g_j| = 2 * sum_i (2i - n - 1) g_(i)
    return float(2.0 * np.dot(ranks, g) / (2.0 * n * g.sum()))


def topk(scores, ids, k):
    """Indices of the ``k`` best rows: higher score first, lower id on ties."""
    order = np.lexsort((ids, -scores))
    return order[:k]


def greedy_l1(x, w, gain, upper=1.0, lower=0.0):
    """Minimal-L1 move of ``x`` inside the box raising ``w . x`` by ``gain``.

    Features are filled in order of decreasing ``|w|``, each moved to the
    box face that increases the logit, until the gain is met. Returns
    ``(x_cf, remaining_gain)``; a positive remainder means infeasible.
    """
    x_cf = np.array(x, dtype=np.float64)
    remaining = float(gain)
    for i in np.argsort(-np.abs(w), kind="stable"):
        if remaining <= 0.0 or w[i] == 0.0:
            break
        room = (upper - x_cf[i]) if w[i] > 0 else (x_cf[i] - lower)
        step = min(room, remaining / abs(w[i]))
        x_cf[i] += step if w[i] > 0 else -step
        remaining -= step * abs(w[i])
    return x_cf, remaining
