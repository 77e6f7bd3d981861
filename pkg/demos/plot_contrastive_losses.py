"""
Spring and Centrifuge contrastive losses
========================================

Both losses pull matching pairs together with ``D**2 / 2``. They differ in
how they push non-matching pairs apart below the margin ``m``: Spring uses
``(m - D)**2 / 2``, Centrifuge ``(m**2 - D**2) / 2``. The ``+SD`` variants
add the spread of each class's distances within the batch.
"""

import numpy as np

from patchbatch.losses import DistanceBatch, LossConfig, Variant, batch_loss, batch_loss_grad, pair_loss

m = 10.0

# The negative branch, sampled across the margin.
print(" D      spring  centrifuge")
for d in np.linspace(0, 12, 7):
    s = pair_loss(Variant.SPRING, 1, d, m)
    c = pair_loss(Variant.CENTRIFUGE, 1, d, m)
    print(f"{d:5.1f} {s:8.2f} {c:10.2f}")

# Centrifuge keeps pushing hard right up to the margin, where Spring has
# already gone soft: per pair the gradients at D = 9 are -1 and -9, halved
# here by the mean over the two pairs.
batch = DistanceBatch([9.0, 9.0], [1, 1])
print("spring grad    ", batch_loss_grad(LossConfig(Variant.SPRING, m), batch))
print("centrifuge grad", batch_loss_grad(LossConfig(Variant.CENTRIFUGE, m), batch))

# A small batch with the SD term: lambda = 0.8 on the pair terms and 0.2
# on sigma_0 + sigma_1.
batch = DistanceBatch([1.0, 3.0, 10.0, 10.0], [0, 0, 1, 1])
print("SpringSD loss", batch_loss(LossConfig(Variant.SPRING_SD, m, 0.8), batch))

# The SD gradient couples every pair of a class: it moves each distance
# towards its class mean. Subtracting the pair part leaves it on its own.
with_sd = batch_loss_grad(LossConfig(Variant.SPRING_SD, m, 0.8), batch)
pairs_only = 0.8 * batch_loss_grad(LossConfig(Variant.SPRING, m), batch)
print("SD part of the gradient", with_sd - pairs_only)
