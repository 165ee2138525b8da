"""Independent reference implementations used only to check the package.

Everything here is written naively (per-pixel loops, whole-population
sorts) so that agreement with the fast implementations is meaningful.
"""

import math

import numpy as np


def sync_sha(metric_at, trial_ids, rung_levels, eta, mode="max"):
    """Synchronous successive halving, brute force.

    All trials train to the first rung; the top ``ceil(n / eta)`` by
    metric continue to the next; repeat.  Returns ``(reached, kept)``:
    for each rung level, the sorted ids that trained to it and the
    sorted ids ranked good enough there to continue.
    """
    alive = sorted(trial_ids)
    reached, kept = {}, {}
    for level in rung_levels:
        reached[level] = list(alive)
        ranked = sorted(alive, key=lambda tid: metric_at(tid, level), reverse=(mode == "max"))
        alive = sorted(ranked[: math.ceil(len(ranked) / eta)])
        kept[level] = list(alive)
    return reached, kept


def naive_rung_decision(previous_entries, metric, eta, mode="max"):
    """Re-derive one stop/continue verdict from a rung's prior entries.

    Ranks the newcomer against the previous metrics (earlier entries
    win ties) and keeps it if it ranks within ceil(n / eta) of the
    grown rung.
    """
    better = 0
    for other in previous_entries:
        if (other > metric if mode == "max" else other < metric) or other == metric:
            better += 1
    rank = better + 1
    n = len(previous_entries) + 1
    return "continue" if rank <= math.ceil(n / eta) else "stop"


def naive_resize_bilinear(image, out_h, out_w):
    """Per-pixel bilinear resize with half-pixel centers, no antialias."""
    h, w = image.shape[:2]
    out = np.zeros((out_h, out_w, 3))
    for oy in range(out_h):
        for ox in range(out_w):
            sy = (oy + 0.5) * h / out_h - 0.5
            sx = (ox + 0.5) * w / out_w - 0.5
            y0, x0 = math.floor(sy), math.floor(sx)
            fy, fx = sy - y0, sx - x0
            acc = np.zeros(3)
            for dy in (0, 1):
                for dx in (0, 1):
                    yy = min(max(y0 + dy, 0), h - 1)
                    xx = min(max(x0 + dx, 0), w - 1)
                    weight = (fy if dy else 1 - fy) * (fx if dx else 1 - fx)
                    acc += weight * image[yy, xx]
            out[oy, ox] = acc
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def naive_affine(image, coeffs, fill=128):
    """Per-pixel inverse-mapped affine with bilinear sampling."""
    a, b, c, d, e, f = coeffs
    h, w = image.shape[:2]
    out = np.zeros((h, w, 3))
    for oy in range(h):
        for ox in range(w):
            sx = a * ox + b * oy + c
            sy = d * ox + e * oy + f
            x0, y0 = math.floor(sx), math.floor(sy)
            fx, fy = sx - x0, sy - y0
            acc = np.zeros(3)
            for dy in (0, 1):
                for dx in (0, 1):
                    yy, xx = y0 + dy, x0 + dx
                    weight = (fy if dy else 1 - fy) * (fx if dx else 1 - fx)
                    if 0 <= yy < h and 0 <= xx < w:
                        acc += weight * image[yy, xx]
                    else:
                        acc += weight * fill
            out[oy, ox] = acc
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def central_difference_gradient(func, params, step=1e-6):
    """Numeric gradient of a scalar function by central differences."""
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    for i in range(params.size):
        hi = params.copy()
        lo = params.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (func(hi) - func(lo)) / (2 * step)
    return grad


def normal_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
