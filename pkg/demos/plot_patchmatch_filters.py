"""
PatchMatch and the match filters
================================

PatchMatch finds, for every pixel of one descriptor field, a pixel of the
other with a small descriptor distance. It starts from random guesses,
propagates good offsets to neighbours and tries random candidates at
shrinking radii. Matches are then kept only if the backward field points
back exactly, if they lie in a large enough connected region and if they
are away from the image border.
"""

import numpy as np
from scipy import ndimage

from patchbatch.flow import DescriptorField
from patchbatch.matcher import (
    MatchConfig,
    bidirectional_filter,
    border_filter,
    connected_component_filter,
    patchmatch,
)

rng = np.random.default_rng(0)

# Smooth random descriptors; pixel (x, y) of the first frame shows up at
# (x + 2, y - 1) in the second.
base = ndimage.gaussian_filter(rng.standard_normal((40, 40, 8)), (2, 2, 0))
a = DescriptorField(base[4:36, 4:36])
b = DescriptorField(base[5:37, 2:34])

# Cost of every pixel after initialisation and after each sweep.
history = []
cfg = MatchConfig(iterations=4, search_radius=10, cc_area_threshold=30, border_margin=2)
fwd = patchmatch(a, b, cfg, np.random.default_rng(1), history)
for i, cost in enumerate(history):
    print(f"after sweep {i}: mean cost {cost.mean():.4f}")
bwd = patchmatch(b, a, cfg, np.random.default_rng(2))

# Each filter only removes matches.
kept = bidirectional_filter(fwd, bwd)
print("bidirectional:", kept.valid.sum(), "of", kept.valid.size)
kept = connected_component_filter(kept, cfg.cc_area_threshold)
print("components:   ", kept.valid.sum())
kept = border_filter(kept, cfg.border_margin)
print("border:       ", kept.valid.sum())

u, v = kept.u[kept.valid], kept.v[kept.valid]
print("surviving offsets equal to (2, -1):", np.mean((u == 2) & (v == -1)))
