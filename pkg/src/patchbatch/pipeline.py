"""Two-frame flow pipeline: encode, match both ways, filter, interpolate, score."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, InterpolationError, PipelineError
from .flow import DenseFlow, DescriptorField, FlowField
from .interp import densify, edge_cost
from .matcher import (
    MatchConfig,
    bidirectional_filter,
    border_filter,
    connected_component_filter,
    patchmatch,
)
from .rng import substream

SD_GUARD = 1e-12


def normalize_image(image):
    """Zero mean, unit SD; a constant image maps to zeros."""
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise DomainError("empty image")
    centred = img - img.mean()
    sd = np.sqrt(np.mean(centred**2))
    if sd < SD_GUARD:
        return np.zeros_like(img)
    return centred / sd


def encode_field(model, image, patch=None, chunk=2048):
    """Descriptor of the centred ``patch x patch`` window at every pixel.

    The encoder runs in eval mode, one window per sample, so fine-grained
    batch norm sees each window exactly as it did in training. Pixels closer
    than ``patch // 2`` to the border get no descriptor (``mask`` False).
    """
    img = np.asarray(image, dtype=np.float64)
    patch = patch or model.input_shape[-1]
    if model.input_shape != (1, patch, patch):
        raise DimensionError(f"model input {model.input_shape} does not take {patch}x{patch} patches")
    h, w = img.shape
    if h < patch or w < patch:
        raise DimensionError(f"image {h}x{w} smaller than the {patch}x{patch} patch")
    half = patch // 2
    win = np.lib.stride_tricks.sliding_window_view(img, (patch, patch))
    hi, wi = win.shape[:2]
    flat = win.reshape(hi * wi, 1, patch, patch)
    prev = model.mode
    model.eval()
    try:
        desc = np.concatenate([model(flat[i : i + chunk]) for i in range(0, flat.shape[0], chunk)])
    finally:
        model.mode = prev
    data = np.zeros((h, w, desc.shape[1]))
    data[half : half + hi, half : half + wi] = desc.reshape(hi, wi, -1)
    mask = np.zeros((h, w), dtype=bool)
    mask[half : half + hi, half : half + wi] = True
    return DescriptorField(data, mask)


def downsample_seeds(flow, factor):
    """Keep the first valid seed (raster order) of every ``factor x factor`` cell."""
    if factor == 1:
        return flow.copy()
    h, w = flow.shape
    valid = np.zeros_like(flow.valid)
    for r0 in range(0, h, factor):
        for c0 in range(0, w, factor):
            cell = flow.valid[r0 : r0 + factor, c0 : c0 + factor]
            hits = np.flatnonzero(cell)
            if hits.size:
                dr, dc = divmod(int(hits[0]), cell.shape[1])
                valid[r0 + dr, c0 + dc] = True
    return flow.with_valid(valid)


@dataclass
class FlowMetrics:
    count: int
    epe: float
    bad_rate: dict
    accuracy: dict

    def as_row(self, prefix=""):
        row = {f"{prefix}count": self.count, f"{prefix}epe": self.epe}
        row.update({f"{prefix}bad{t:g}": r for t, r in self.bad_rate.items()})
        row.update({f"{prefix}acc{t:g}": r for t, r in self.accuracy.items()})
        return row


def flow_metrics(pred, gt, thresholds=(3.0,), radii=(10.0,)):
    """Endpoint error statistics over ground-truth-valid pixels.

    A :class:`FlowField` prediction is scored only where it is valid, a
    :class:`DenseFlow` everywhere.
    """
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    mask = gt.valid.copy()
    if isinstance(pred, FlowField):
        mask &= pred.valid
    if not mask.any():
        raise DomainError("no pixel to evaluate")
    err = np.hypot(np.asarray(pred.u, float) - gt.u, np.asarray(pred.v, float) - gt.v)[mask]
    return FlowMetrics(
        count=int(err.size),
        epe=float(err.mean()),
        bad_rate={float(t): float(np.mean(err > t)) for t in thresholds},
        accuracy={float(r): float(np.mean(err < r)) for r in radii},
    )


@dataclass(frozen=True)
class PipelineConfig:
    match: MatchConfig = field(default_factory=MatchConfig)
    k: int = 25
    kappa: float = 100.0
    downsample: int = 1
    thresholds: tuple = (3.0,)
    radii: tuple = (10.0,)
    seed: int = 0

    def __post_init__(self):
        if self.downsample not in (1, 2, 4):
            raise ConfigError("downsample factor must be 1, 2 or 4")
        if self.k < 1:
            raise ConfigError("k must be >= 1")


@dataclass
class FlowResult:
    raw: FlowField
    sparse: FlowField
    seeds: FlowField
    dense: DenseFlow
    sparse_metrics: FlowMetrics = None
    dense_metrics: FlowMetrics = None
    stage_counts: dict = field(default_factory=dict)


def _embed(flow, shape, half):
    h, w = shape
    u = np.zeros(shape, dtype=np.int64)
    v = np.zeros(shape, dtype=np.int64)
    valid = np.zeros(shape, dtype=bool)
    fh, fw = flow.shape
    u[half : half + fh, half : half + fw] = flow.u
    v[half : half + fh, half : half + fw] = flow.v
    valid[half : half + fh, half : half + fw] = flow.valid
    return FlowField(u, v, valid)


def _crop(field_, half):
    h, w = field_.height, field_.width
    return DescriptorField(field_.data[half : h - half, half : w - half])


def run_flow(img_a, img_b, model, cfg=None, gt=None):
    """Sparse and dense flow from ``img_a`` to ``img_b``.

    Stages: normalise, encode both frames, PatchMatch both directions,
    bidirectional check, connected-component and border filters, seed
    decimation, geodesic interpolation. With ``gt`` the result also carries
    metrics for the surviving sparse matches and for the dense field.
    """
    cfg = cfg or PipelineConfig()
    img_a = np.asarray(img_a, dtype=np.float64)
    img_b = np.asarray(img_b, dtype=np.float64)
    if img_a.shape != img_b.shape:
        raise PipelineError("input", f"image sizes differ: {img_a.shape} vs {img_b.shape}")
    na, nb = normalize_image(img_a), normalize_image(img_b)
    try:
        fa = encode_field(model, na)
        fb = encode_field(model, nb)
    except DimensionError as exc:
        raise PipelineError("encode", str(exc)) from exc
    half = model.input_shape[-1] // 2
    ca, cb = _crop(fa, half), _crop(fb, half)
    fwd = patchmatch(ca, cb, cfg.match, substream(cfg.seed, "patchmatch-fwd"))
    bwd = patchmatch(cb, ca, cfg.match, substream(cfg.seed, "patchmatch-bwd"))
    consistent = bidirectional_filter(fwd, bwd)

    shape = img_a.shape
    raw = _embed(fwd, shape, half)
    counts = {"patchmatch": int(raw.valid.sum())}
    flow = _embed(consistent, shape, half)
    counts["bidirectional"] = int(flow.valid.sum())
    flow = connected_component_filter(flow, cfg.match.cc_area_threshold)
    counts["connected_component"] = int(flow.valid.sum())
    flow = border_filter(flow, cfg.match.border_margin)
    counts["border"] = int(flow.valid.sum())
    seeds = downsample_seeds(flow, cfg.downsample)
    counts["seeds"] = int(seeds.valid.sum())
    if counts["seeds"] == 0:
        detail = ", ".join(f"{k}={v}" for k, v in counts.items())
        raise PipelineError("filter", f"no valid seeds survive filtering ({detail})")
    try:
        dense = densify(seeds, edge_cost(na), cfg.k, cfg.kappa)
    except InterpolationError as exc:
        raise PipelineError("interpolate", str(exc)) from exc

    result = FlowResult(raw, flow, seeds, dense, stage_counts=counts)
    if gt is not None:
        if flow.valid.any() and (flow.valid & gt.valid).any():
            result.sparse_metrics = flow_metrics(flow, gt, cfg.thresholds, cfg.radii)
        result.dense_metrics = flow_metrics(dense, gt, cfg.thresholds, cfg.radii)
    return result
