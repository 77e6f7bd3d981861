"""Synthetic Gaussian-cluster benchmark for the contrastive loss variants.

``n_c`` centres are drawn uniformly from the unit hypercube in ``dim``
dimensions. A matching pair is two independent draws from the same centre,
a non-matching pair draws from two distinct centres; every draw adds
isotropic noise of variance ``tau``. Optionally each sample is rescaled to
unit L2 norm. Siamese MLPs are trained with each loss variant and scored by
the AUC of their test-pair distances, next to the raw ``||x1 - x2||``
baseline.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .losses import LossConfig, Variant
from .metrics import auc
from .net import mlp
from .rng import substream
from .siamese import PairBatch, pair_distances
from .training import DivergenceError, train

BASELINE = "baseline"
MARGIN_GRID = (1.0, 3.0, 10.0, 30.0)


@dataclass(frozen=True)
class SynthConfig:
    n_c: int = 10
    tau: float = 3.0
    normalize: bool = False
    dim: int = 256
    n_train: int = 10_000
    n_test: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.n_c < 2:
            raise ConfigError(f"need at least 2 centres for non-matching pairs, got n_c={self.n_c}")
        if not self.tau >= 0:
            raise ConfigError(f"tau must be non-negative, got {self.tau}")
        if self.dim < 1 or self.n_train < 2 or self.n_test < 2:
            raise ConfigError("dim must be >= 1 and sample counts >= 2")


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 30
    batch_size: int = 256
    lam: float = 0.8
    hidden: tuple = (256, 256, 256)
    out_dim: int = 256
    margin_grid: tuple = MARGIN_GRID
    tune_epochs: int = None  # None: same as ``epochs``


def sample_centers(config, rng):
    return rng.uniform(0.0, 1.0, size=(config.n_c, config.dim))


def sample_pairs_gaussian(config, rng, n=None, centers=None):
    """Draw ``n`` pairs (first half matching, second half non-matching)."""
    n = config.n_train if n is None else int(n)
    if centers is None:
        centers = sample_centers(config, rng)
    half = n // 2
    same = rng.integers(config.n_c, size=half)
    first = rng.integers(config.n_c, size=n - half)
    # Uniform over ordered pairs (i, j) with i != j.
    second = (first + rng.integers(1, config.n_c, size=n - half)) % config.n_c
    ia = np.concatenate([same, first])
    ib = np.concatenate([same, second])
    noise = math.sqrt(config.tau)
    left = centers[ia] + noise * rng.standard_normal((n, config.dim))
    right = centers[ib] + noise * rng.standard_normal((n, config.dim))
    if config.normalize:
        left /= np.linalg.norm(left, axis=1, keepdims=True)
        right /= np.linalg.norm(right, axis=1, keepdims=True)
    labels = np.concatenate([np.zeros(half, np.int64), np.ones(n - half, np.int64)])
    return PairBatch(left, right, labels)


def baseline_auc(pairs):
    return auc(np.linalg.norm(pairs.left - pairs.right, axis=1), pairs.labels)


def train_and_score(variant, margin, train_pairs, test_pairs, settings, seed):
    """Train one Siamese MLP; return its test AUC (NaN if training diverged)."""
    dims = [train_pairs.left.shape[1], *settings.hidden, settings.out_dim]
    model = mlp(dims, substream(seed, "init"))
    cfg = LossConfig(variant, margin, settings.lam)
    try:
        train(model, cfg, train_pairs, settings.epochs, substream(seed, "shuffle"), settings.batch_size)
    except DivergenceError:
        return float("nan")
    model.eval()
    d = pair_distances(model, test_pairs.left, test_pairs.right)
    if not np.all(np.isfinite(d)):
        return float("nan")
    return auc(d, test_pairs.labels)


def tune_margin(config, variant, settings, seed):
    """Pick the margin from ``settings.margin_grid`` by validation AUC.

    Training pairs are split 4:1; each run lasts ``tune_epochs`` epochs
    (``epochs`` when unset).
    """
    rng = substream(seed, "tune-data")
    pairs = sample_pairs_gaussian(config, rng)
    order = rng.permutation(len(pairs))
    cut = len(pairs) * 4 // 5
    fit, held = pairs.subset(np.sort(order[:cut])), pairs.subset(np.sort(order[cut:]))
    short = TrainSettings(**{**asdict(settings), "epochs": settings.tune_epochs or settings.epochs})
    scores = []
    for m in settings.margin_grid:
        a = train_and_score(variant, m, fit, held, short, seed)
        scores.append(-1.0 if math.isnan(a) else a)
    return float(settings.margin_grid[int(np.argmax(scores))])


@dataclass
class AucRow:
    variant: str
    n_c: int
    tau: float
    normalize: bool
    rep: int
    auc: float
    margin: float = float("nan")

    @property
    def failed(self):
        return math.isnan(self.auc)


@dataclass
class AucReport:
    rows: list = field(default_factory=list)
    margins: dict = field(default_factory=dict)

    def cell(self, variant, n_c=None, tau=None, normalize=None):
        out = []
        for r in self.rows:
            if r.variant != variant:
                continue
            if n_c is not None and r.n_c != n_c:
                continue
            if tau is not None and r.tau != tau:
                continue
            if normalize is not None and r.normalize != normalize:
                continue
            out.append(r.auc)
        return np.asarray(out)

    def mean_sd(self, variant, **where):
        a = self.cell(variant, **where)
        a = a[~np.isnan(a)]
        if a.size == 0:
            return float("nan"), float("nan")
        return float(a.mean()), float(a.std())

    def summary(self):
        """One record per (variant, n_c, tau, normalize) cell."""
        keys = []
        for r in self.rows:
            k = (r.variant, r.n_c, r.tau, r.normalize)
            if k not in keys:
                keys.append(k)
        out = []
        for variant, n_c, tau, normalize in keys:
            vals = self.cell(variant, n_c, tau, normalize)
            ok = vals[~np.isnan(vals)]
            out.append(
                dict(
                    variant=variant,
                    n_c=n_c,
                    tau=tau,
                    normalize=normalize,
                    reps=int(vals.size),
                    failed=int(vals.size - ok.size),
                    mean_auc=float(ok.mean()) if ok.size else float("nan"),
                    sd_auc=float(ok.std()) if ok.size else float("nan"),
                )
            )
        return out


def _variant_names(variants):
    names = []
    for v in variants:
        names.append(BASELINE if str(v).lower() == BASELINE else Variant.parse(v).value)
    return names


def run_experiment(
    config, variants, reps=10, settings=None, margins=None, report=None, progress=None
):
    """Run ``reps`` repetitions of one (n_c, tau, normalize) cell.

    Each repetition draws fresh centres and fresh train/test pairs; all
    variants in a repetition share the data and the initial weights.
    ``margins`` maps variant names to fixed margins; missing ones are tuned.
    """
    settings = settings or TrainSettings()
    report = report if report is not None else AucReport()
    names = _variant_names(variants)
    margins = dict(margins or {})
    for name in names:
        if name != BASELINE and name not in margins:
            margins[name] = tune_margin(config, Variant.parse(name), settings, substream(config.seed, "tune", name).integers(2**31))
    report.margins.update({k: v for k, v in margins.items() if k in names})
    for rep in range(reps):
        rep_seed = int(substream(config.seed, "rep", config.n_c, repr(config.tau), int(config.normalize), rep).integers(2**31))
        data_rng = substream(rep_seed, "data")
        centers = sample_centers(config, data_rng)
        train_pairs = sample_pairs_gaussian(config, data_rng, config.n_train, centers)
        test_pairs = sample_pairs_gaussian(config, data_rng, config.n_test, centers)
        for name in names:
            if name == BASELINE:
                value, m = baseline_auc(test_pairs), float("nan")
            else:
                m = margins[name]
                value = train_and_score(Variant.parse(name), m, train_pairs, test_pairs, settings, rep_seed)
            row = AucRow(name, config.n_c, config.tau, config.normalize, rep, value, m)
            report.rows.append(row)
            if progress is not None:
                progress(row)
    return report


def run_sweep(
    nc_list, tau_list, normalize, variants, reps=10, settings=None, seed=0, margins=None, progress=None, **config_kw
):
    """Cartesian sweep over ``n_c`` and ``tau``.

    Margins not given in ``margins`` are tuned once per variant, on the
    first cell of the sweep, and reused for every other cell. Extra keyword
    arguments go to :class:`SynthConfig`.
    """
    settings = settings or TrainSettings()
    report = AucReport()
    margins = dict(margins or {})
    for n_c in nc_list:
        for tau in tau_list:
            cfg = SynthConfig(n_c=int(n_c), tau=float(tau), normalize=bool(normalize), seed=seed, **config_kw)
            run_experiment(cfg, variants, reps, settings, margins, report, progress)
            margins = dict(report.margins)
    return report
