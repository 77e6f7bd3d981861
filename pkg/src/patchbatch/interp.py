"""Edge-aware sparse-to-dense flow interpolation.

Every pixel gathers its ``K`` nearest seeds under a geodesic distance on
the 4-connected pixel grid, where stepping into pixel ``p`` costs
``1 + kappa * cost(p)``. A locally weighted affine model of the flow is
fitted to those seeds (weights ``exp(-d / mean(d))``) and evaluated at the
pixel.
"""
import heapq

import numpy as np
from scipy import ndimage

from .errors import DimensionError, DomainError, InterpolationError
from .flow import DenseFlow

RIDGE = 1e-9
_NEIGHBOURS = ((0, 1), (1, 0), (0, -1), (-1, 0))


def edge_cost(image):
    """Sobel gradient magnitude scaled to ``[0, 1]`` (all zeros for a flat image)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"expected a grey image, got shape {img.shape}")
    gx = ndimage.sobel(img, axis=1, mode="nearest")
    gy = ndimage.sobel(img, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0:
        return np.zeros_like(mag)
    return mag / peak


def _step_costs(costs, kappa):
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2:
        raise DimensionError("cost map must be 2-D")
    if np.any(costs < 0) or not np.all(np.isfinite(costs)):
        raise DomainError("edge costs must be finite and non-negative")
    return 1.0 + kappa * costs


def nearest_seeds(costs, seeds, k, kappa=100.0):
    """The ``k`` geodesically nearest seeds of every pixel.

    ``seeds`` is an ``[S, 2]`` array of ``(row, col)`` positions. Distances
    are measured from the seed to the pixel. Runs one best-first expansion
    from all seeds at once, where each pixel is settled at most once per
    seed and by at most ``k`` seeds; a seed among the ``k`` nearest of a
    pixel is also among the ``k`` nearest of every pixel on its shortest
    path there, so the result is exact.

    Returns ``(index, dist)`` arrays of shape ``[H, W, k']`` with
    ``k' = min(k, S)``, ordered by increasing distance.
    """
    step = _step_costs(costs, kappa)
    h, w = step.shape
    seeds = np.asarray(seeds, dtype=np.int64).reshape(-1, 2)
    if seeds.shape[0] == 0:
        raise InterpolationError("no seeds")
    k = min(int(k), seeds.shape[0])
    step_l = step.ravel().tolist()
    found = [[] for _ in range(h * w)]
    settled = [set() for _ in range(h * w)]
    heap = []
    for s, (r, c) in enumerate(seeds.tolist()):
        if not (0 <= r < h and 0 <= c < w):
            raise DomainError(f"seed {(r, c)} outside the {h}x{w} grid")
        heap.append((0.0, s, r * w + c))
    heapq.heapify(heap)
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        d, s, p = pop(heap)
        got = found[p]
        if len(got) >= k or s in settled[p]:
            continue
        settled[p].add(s)
        got.append((d, s))
        r, c = divmod(p, w)
        for dr, dc in _NEIGHBOURS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w:
                q = rr * w + cc
                if len(found[q]) < k and s not in settled[q]:
                    push(heap, (d + step_l[q], s, q))
    index = np.array([[s for _, s in f] for f in found], dtype=np.int64).reshape(h, w, k)
    dist = np.array([[d for d, _ in f] for f in found], dtype=np.float64).reshape(h, w, k)
    return index, dist


def geodesic_distances(costs, source, kappa=100.0):
    """Shortest-path distance from ``source = (row, col)`` to every pixel."""
    _, dist = nearest_seeds(costs, [source], 1, kappa)
    return dist[..., 0]


def densify(seeds, costs, k=25, kappa=100.0):
    """Dense flow from the valid entries of the sparse field ``seeds``."""
    h, w = seeds.shape
    costs = np.asarray(costs, dtype=np.float64)
    if costs.shape != (h, w):
        raise DimensionError(f"cost map {costs.shape} does not match flow {seeds.shape}")
    rows, cols = np.nonzero(seeds.valid)
    if rows.size == 0:
        raise InterpolationError("no valid seeds to interpolate from")
    su = np.asarray(seeds.u, dtype=np.float64)[rows, cols]
    sv = np.asarray(seeds.v, dtype=np.float64)[rows, cols]
    index, dist = nearest_seeds(costs, np.stack([rows, cols], axis=1), k, kappa)

    scale = dist.mean(axis=-1, keepdims=True)
    weights = np.exp(-dist / np.where(scale > 0, scale, 1.0))
    ys, xs = np.mgrid[0:h, 0:w]
    # Seed coordinates relative to the query pixel: the fitted constant term
    # is then the flow at the pixel itself.
    dx = cols[index] - xs[..., None]
    dy = rows[index] - ys[..., None]
    design = np.stack([dx, dy, np.ones_like(dx)], axis=-1).astype(np.float64)
    wsum = weights.sum(axis=-1)
    nu, nv = su[index], sv[index]
    mean_u = (weights * nu).sum(axis=-1) / wsum
    mean_v = (weights * nv).sum(axis=-1) / wsum

    # Fit the residual around the weighted mean so that constant flows come
    # out exactly, whatever the ridge does to the solve.
    wd = design * weights[..., None]
    normal = np.einsum("hwki,hwkj->hwij", wd, design)
    rhs_u = np.einsum("hwki,hwk->hwi", wd, nu - mean_u[..., None])
    rhs_v = np.einsum("hwki,hwk->hwi", wd, nv - mean_v[..., None])
    sing = np.linalg.svd(normal, compute_uv=False)
    degenerate = sing[..., -1] <= 1e-10 * sing[..., 0]
    normal = normal + RIDGE * np.eye(3)
    coef_u = np.linalg.solve(normal, rhs_u[..., None])[..., 0]
    coef_v = np.linalg.solve(normal, rhs_v[..., None])[..., 0]
    u = mean_u + np.where(degenerate, 0.0, coef_u[..., 2])
    v = mean_v + np.where(degenerate, 0.0, coef_v[..., 2])
    return DenseFlow(u, v)
