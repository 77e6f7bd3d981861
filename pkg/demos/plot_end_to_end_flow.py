"""
From two frames to a dense flow field
=====================================

A small patch encoder is trained on synthetic textured frames with known
motion, then the full pipeline runs on a new pair: per-pixel descriptors,
PatchMatch in both directions, filtering, and interpolation.
"""

import numpy as np

from patchbatch.flow import FlowField
from patchbatch.losses import LossConfig, Variant
from patchbatch.matcher import MatchConfig
from patchbatch.net import toy_patch_encoder
from patchbatch.pipeline import PipelineConfig, normalize_image, run_flow
from patchbatch.sampling import sample_pairs, textured_image
from patchbatch.siamese import PairBatch
from patchbatch.training import train

rng = np.random.default_rng(0)

# Training frames: random texture, rolled by a random integer shift.
frames = []
for _ in range(3):
    a = textured_image(rng, 48, 48)
    sx, sy = (int(s) for s in rng.integers(-5, 6, 2))
    b = np.roll(a, (sy, sx), axis=(0, 1))
    frames.append((normalize_image(a), normalize_image(b), FlowField(np.full(a.shape, sx), np.full(a.shape, sy))))


def sampler(epoch):
    parts = [sample_pairs(a, b, f, 9, 512, np.random.default_rng([epoch, i])) for i, (a, b, f) in enumerate(frames)]
    return PairBatch(*(np.concatenate([getattr(p, k) for p in parts]) for k in ("left", "right", "labels")))


model = toy_patch_encoder(np.random.default_rng(1))
losses = train(model, LossConfig(Variant.CENTRIFUGE_SD, 3.0), None, 15, np.random.default_rng(2), sampler=sampler)
print("training loss:", " ".join(f"{x:.3f}" for x in losses))

# A fresh frame moved 4 px right and 2 px down.
img = textured_image(np.random.default_rng(9), 56, 56)
moved = np.roll(img, (2, 4), axis=(0, 1))
ys, xs = np.mgrid[0:56, 0:56]
gt = FlowField(np.full(img.shape, 4.0), np.full(img.shape, 2.0), (xs < 52) & (ys < 54))

cfg = PipelineConfig(match=MatchConfig(search_radius=16, cc_area_threshold=50))
result = run_flow(img, moved, model, cfg, gt)
print("matches after each stage:", result.stage_counts)
print("sparse EPE", round(result.sparse_metrics.epe, 4), " dense EPE", round(result.dense_metrics.epe, 4))
