"""PatchMatch over descriptor fields and the match-filtering stages."""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DimensionError, DomainError
from .flow import FlowField
from .rng import substream

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass(frozen=True)
class MatchConfig:
    iterations: int = 2
    search_radius: int = 10
    cc_area_threshold: int = 400
    border_margin: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.search_radius < 1:
            raise ConfigError("search_radius must be >= 1")
        if self.cc_area_threshold < 0 or self.border_margin < 0:
            raise ConfigError("area threshold and border margin must be non-negative")


def search_radii(radius):
    """Random-search radii: ``radius``, halved each attempt, down to 1."""
    out = []
    r = int(radius)
    while r >= 1:
        out.append(r)
        r //= 2
    return out


def match_costs(src, dst, flow):
    """Squared L2 cost of every source pixel under integer ``flow``."""
    h, w = src.data.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    ty = ys + flow.v.astype(np.int64)
    tx = xs + flow.u.astype(np.int64)
    diff = src.data - dst.data[ty, tx]
    return np.einsum("ijk,ijk->ij", diff, diff)


def patchmatch(src, dst, cfg, rng=None, history=None):
    """Integer nearest-neighbour field from ``src`` into ``dst``.

    Random initialisation, then ``cfg.iterations`` sweeps. Even sweeps scan
    in raster order and propagate from the left and upper neighbours; odd
    sweeps scan in reverse and propagate from the right and lower ones.
    After propagation each pixel tries one random candidate per radius in
    :func:`search_radii` around its current best match. Every candidate
    target is clamped to the bounds of ``dst``.

    If ``history`` is a list, the per-pixel cost grid is appended after the
    initialisation and after every sweep.
    """
    if src.dim != dst.dim:
        raise DimensionError(f"descriptor dims differ: {src.dim} vs {dst.dim}")
    rng = rng if rng is not None else substream(cfg.seed, "patchmatch")
    S = src.data
    T = dst.data
    h, w = S.shape[:2]
    hd, wd = T.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    # Matched target coordinates, kept as Python ints inside the sweep.
    ty = rng.integers(0, hd, size=(h, w))
    tx = rng.integers(0, wd, size=(h, w))
    diff = S - T[ty, tx]
    cost = np.einsum("ijk,ijk->ij", diff, diff)
    if history is not None:
        history.append(cost.copy())
    radii = search_radii(cfg.search_radius)
    ty_l, tx_l, cost_l = ty.tolist(), tx.tolist(), cost.tolist()

    for it in range(cfg.iterations):
        forward = it % 2 == 0
        step = -1 if forward else 1
        rows = range(h) if forward else range(h - 1, -1, -1)
        cols = list(range(w)) if forward else list(range(w - 1, -1, -1))
        # One random offset per pixel and radius, drawn up front for the sweep.
        jitter = rng.random((h, w, len(radii), 2))
        for y in rows:
            s_row = S[y]
            cy, cx, cc = ty_l[y], tx_l[y], cost_l[y]
            for x in cols:
                desc = s_row[x]
                by, bx, bc = cy[x], cx[x], cc[x]
                # Propagation: reuse the neighbour's offset at this pixel.
                nx = x + step
                if 0 <= nx < w:
                    py = cy[nx]
                    px = min(max(cx[nx] - nx + x, 0), wd - 1)
                    if py != by or px != bx:
                        d = desc - T[py, px]
                        c = float(d @ d)
                        if c < bc:
                            by, bx, bc = py, px, c
                ny = y + step
                if 0 <= ny < h:
                    py = min(max(ty_l[ny][x] - ny + y, 0), hd - 1)
                    px = tx_l[ny][x]
                    if py != by or px != bx:
                        d = desc - T[py, px]
                        c = float(d @ d)
                        if c < bc:
                            by, bx, bc = py, px, c
                # Random search with shrinking radius around the current best.
                jit = jitter[y, x]
                for k, r in enumerate(radii):
                    span = 2 * r + 1
                    py = min(max(by + int(jit[k, 0] * span) - r, 0), hd - 1)
                    px = min(max(bx + int(jit[k, 1] * span) - r, 0), wd - 1)
                    if py == by and px == bx:
                        continue
                    d = desc - T[py, px]
                    c = float(d @ d)
                    if c < bc:
                        by, bx, bc = py, px, c
                cy[x], cx[x], cc[x] = by, bx, bc
        if history is not None:
            history.append(np.array(cost_l))

    ty = np.array(ty_l, dtype=np.int64)
    tx = np.array(tx_l, dtype=np.int64)
    return FlowField(tx - xs, ty - ys, np.ones((h, w), dtype=bool))


def bidirectional_filter(fwd, bwd):
    """Keep a forward match only if the backward field points exactly back."""
    if fwd.shape != bwd.shape:
        raise DimensionError(f"forward {fwd.shape} and backward {bwd.shape} fields differ in size")
    h, w = fwd.shape
    ys, xs = np.mgrid[0:h, 0:w]
    u = np.rint(fwd.u).astype(np.int64)
    v = np.rint(fwd.v).astype(np.int64)
    tx, ty = xs + u, ys + v
    inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    txc, tyc = np.clip(tx, 0, w - 1), np.clip(ty, 0, h - 1)
    back_ok = (
        bwd.valid[tyc, txc]
        & (np.rint(bwd.u[tyc, txc]).astype(np.int64) == -u)
        & (np.rint(bwd.v[tyc, txc]).astype(np.int64) == -v)
    )
    return fwd.with_valid(fwd.valid & inside & back_ok)


def connected_component_filter(flow, area_threshold):
    """Drop 4-connected components of the valid mask smaller than ``area_threshold``."""
    labels, count = ndimage.label(flow.valid, structure=_FOUR_CONNECTED)
    if count == 0:
        return flow.copy()
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    keep = sizes >= area_threshold
    keep[0] = False
    return flow.with_valid(keep[labels])


def border_filter(flow, margin):
    """Invalidate matches within ``margin`` pixels of any image edge."""
    if margin < 0:
        raise DomainError("margin must be non-negative")
    valid = flow.valid.copy()
    if margin:
        valid[:margin, :] = False
        valid[-margin:, :] = False
        valid[:, :margin] = False
        valid[:, -margin:] = False
    return flow.with_valid(valid)
