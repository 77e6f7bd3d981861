"""Training pairs of image patches cut along a ground-truth flow."""
import numpy as np
from scipy import ndimage

from .errors import DimensionError, SamplingError
from .siamese import PairBatch


def draw_shifts(rng, n, max_shift=8):
    """``[n, 2]`` integer shifts, each axis in ``+-{1..max_shift}``."""
    mag = rng.integers(1, max_shift + 1, size=(n, 2))
    sign = rng.choice(np.array([-1, 1]), size=(n, 2))
    return mag * sign


def _interior(shape, half, extra=0):
    h, w = shape
    m = half + extra
    ok = np.zeros(shape, dtype=bool)
    if h > 2 * m and w > 2 * m:
        ok[m : h - m, m : w - m] = True
    return ok


def _targets(flow):
    h, w = flow.shape
    ys, xs = np.mgrid[0:h, 0:w]
    return xs + np.rint(flow.u).astype(np.int64), ys + np.rint(flow.v).astype(np.int64)


def _candidates(img1, img2, flow, half, extra):
    tx, ty = _targets(flow)
    h2, w2 = img2.shape
    m = half + extra
    ok = _interior(img1.shape, half) & flow.valid
    ok &= (tx >= m) & (tx < w2 - m) & (ty >= m) & (ty < h2 - m)
    ys, xs = np.nonzero(ok)
    return ys, xs, ty[ys, xs], tx[ys, xs]


def _cut(img, ys, xs, half):
    p = 2 * half + 1
    win = np.lib.stride_tricks.sliding_window_view(img, (p, p))
    return win[ys - half, xs - half]


def augment(patches_a, patches_b, rng):
    """Random flip and quarter-turn rotation, shared by the two members of each pair."""
    n = patches_a.shape[0]
    k = rng.integers(0, 4, size=n)
    flip = rng.random(n) < 0.5
    out_a = np.empty_like(patches_a)
    out_b = np.empty_like(patches_b)
    for i in range(n):
        a, b = patches_a[i], patches_b[i]
        if flip[i]:
            a, b = a[:, ::-1], b[:, ::-1]
        out_a[i] = np.rot90(a, k[i])
        out_b[i] = np.rot90(b, k[i])
    return out_a, out_b


def sample_pairs(img1, img2, flow, patch, n, rng, max_shift=8, augment_pairs=True):
    """Half matching, half non-matching patch pairs (``[n, 1, patch, patch]``).

    A matching pair takes the patch around ``p`` in ``img1`` and around
    ``p + flow(p)`` in ``img2``. A non-matching pair moves the second patch by
    an extra shift of 1 to ``max_shift`` pixels on both axes. ``rng`` may be a
    ``numpy.random.Generator`` or an integer seed.
    """
    if patch % 2 != 1:
        raise DimensionError("patch size must be odd")
    img1 = np.asarray(img1, dtype=np.float64)
    img2 = np.asarray(img2, dtype=np.float64)
    if flow.shape != img1.shape:
        raise DimensionError(f"flow {flow.shape} does not match image {img1.shape}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    half = patch // 2
    n_pos = n // 2
    n_neg = n - n_pos

    pos = _candidates(img1, img2, flow, half, 0)
    neg = _candidates(img1, img2, flow, half, max_shift)
    if pos[0].size == 0 or (n_neg and neg[0].size == 0):
        raise SamplingError("no pixel has a valid ground-truth match with room for a full patch")

    i = rng.integers(0, pos[0].size, size=n_pos)
    ys, xs, tys, txs = (a[i] for a in pos)
    j = rng.integers(0, neg[0].size, size=n_neg)
    shifts = draw_shifts(rng, n_neg, max_shift)
    ys = np.concatenate([ys, neg[0][j]])
    xs = np.concatenate([xs, neg[1][j]])
    tys = np.concatenate([tys, neg[2][j] + shifts[:, 1]])
    txs = np.concatenate([txs, neg[3][j] + shifts[:, 0]])

    left = _cut(img1, ys, xs, half)
    right = _cut(img2, tys, txs, half)
    if augment_pairs:
        left, right = augment(left, right, rng)
    labels = np.concatenate([np.zeros(n_pos, np.int64), np.ones(n_neg, np.int64)])
    return PairBatch(left[:, None].copy(), right[:, None].copy(), labels)


def textured_image(rng, height, width, smooth=1.0, levels=255.0):
    """Smoothed white noise stretched to ``[0, levels]``: unique local texture everywhere."""
    img = ndimage.gaussian_filter(rng.standard_normal((height, width)), smooth)
    img -= img.min()
    img *= levels / max(img.max(), 1e-12)
    return np.rint(img)
