"""Command-line entry points: ``synth``, ``train`` and ``flow``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every command writes a ``key=value`` manifest next to its outputs; passing
that manifest back with ``--config`` reproduces the run.
"""
import argparse
import logging
import os
import sys

import numpy as np

from . import __version__, checkpoint
from .artifacts import now, read_config, svg_line_plot, write_csv, write_manifest
from .errors import ConfigError, DomainError, PatchBatchError, PipelineError
from .flow import read_pbfl1, read_pgm, write_pbfl1
from .losses import LossConfig, Variant
from .matcher import MatchConfig
from .net import full_patch_encoder, toy_patch_encoder
from .optim import AdaDelta
from .pipeline import PipelineConfig, normalize_image, run_flow
from .rng import substream
from .sampling import sample_pairs
from .siamese import PairBatch
from .synthgauss import BASELINE, TrainSettings, run_sweep
from .training import DivergenceError, train

log = logging.getLogger("patchbatch")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_META_KEYS = {"command", "version", "started", "finished", "output"}


class UsageError(Exception):
    pass


def _float_list(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _variant_list(text):
    names = [t.strip() for t in str(text).split(",") if t.strip()]
    out = []
    for name in names:
        if name.lower() == BASELINE:
            out.append(BASELINE)
            continue
        try:
            out.append(Variant.parse(name).value)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return out


def _variant(text):
    try:
        return Variant.parse(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="patchbatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.commands = {}

    p = parser.commands["synth"] = sub.add_parser("synth", help="Gaussian-cluster AUC sweep for the loss variants")
    p.add_argument("--config")
    p.add_argument("--nc-list", type=_int_list, default="10")
    p.add_argument("--tau-list", type=_float_list, default="3")
    p.add_argument("--normalize", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--variants", type=_variant_list, default="baseline,spring,centrifuge,spring_sd,centrifuge_sd")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--n-train", type=int, default=10_000)
    p.add_argument("--n-test", type=int, default=10_000)
    p.add_argument("--margins", default="", help="fixed margins, e.g. spring=10,centrifuge=30; others are tuned")
    p.add_argument("--lambda", dest="lam", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="synth_out")

    p = parser.commands["train"] = sub.add_parser("train", help="train a patch encoder on image pairs with ground-truth flow")
    p.add_argument("--config")
    p.add_argument("--data", required=False, help="text file, one 'img1.pgm img2.pgm flow.pbfl' triple per line")
    p.add_argument("--variant", type=_variant, default="centrifuge_sd")
    p.add_argument("--margin", type=float, default=10.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.8)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--samples", type=int, default=2048, help="pairs drawn per epoch")
    p.add_argument("--patch", type=int, default=9)
    p.add_argument("--arch", choices=("toy", "full"), default="toy")
    p.add_argument("--max-shift", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.pbnet")

    p = parser.commands["flow"] = sub.add_parser("flow", help="sparse + dense flow between two frames")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--img1")
    p.add_argument("--img2")
    p.add_argument("--gt")
    p.add_argument("--radius", type=int, default=10)
    p.add_argument("--iters", type=int, default=2)
    p.add_argument("--cc-area", type=int, default=400)
    p.add_argument("--border", type=int, default=0)
    p.add_argument("--downsample", type=int, default=1)
    p.add_argument("--k", type=int, default=25)
    p.add_argument("--kappa", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", default="flow")
    return parser


def parse_args(argv):
    """Parse flags, filling unset ones from ``--config`` (flags win)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            values = read_config(args.config)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        sub = parser.commands[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in values.items():
            dest = key.replace("-", "_")
            if key in _META_KEYS:
                continue
            if dest == "lambda":
                dest = "lam"
            if dest not in known:
                raise UsageError(f"unknown config key {key!r}")
            defaults[dest] = value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _config_of(args, skip=("config", "verbose", "command")):
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if isinstance(value, list):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        if value is None:
            continue
        out["lambda" if key == "lam" else key] = value
    return out


def _parse_margins(text):
    out = {}
    for item in str(text).split(","):
        if not item.strip():
            continue
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"bad margin spec {item!r}")
        out[Variant.parse(name).value] = float(value)
    return out


def cmd_synth(args):
    if args.reps < 1 or args.epochs < 1:
        raise ConfigError("--reps and --epochs must be >= 1")
    if not args.nc_list or not args.tau_list or not args.variants:
        raise ConfigError("--nc-list, --tau-list and --variants must be non-empty")
    for n_c in args.nc_list:
        if n_c < 2:
            raise ConfigError("every n_c must be >= 2")
    os.makedirs(args.out_dir, exist_ok=True)
    started = now()
    settings = TrainSettings(epochs=args.epochs, lam=args.lam)
    report = run_sweep(
        args.nc_list,
        args.tau_list,
        args.normalize,
        args.variants,
        args.reps,
        settings,
        seed=args.seed,
        margins=_parse_margins(args.margins),
        progress=lambda r: log.info("%s n_c=%d tau=%g rep=%d auc=%.4f", r.variant, r.n_c, r.tau, r.rep, r.auc),
        n_train=args.n_train,
        n_test=args.n_test,
    )

    cells = os.path.join(args.out_dir, "synth_cells.csv")
    summary = os.path.join(args.out_dir, "synth_summary.csv")
    plot = os.path.join(args.out_dir, "synth_plot.svg")
    manifest = os.path.join(args.out_dir, "manifest.txt")
    write_csv(
        cells,
        ["variant", "n_c", "tau", "normalize", "rep", "margin", "auc", "status"],
        [dict(vars(r), status="failed" if r.failed else "ok") for r in report.rows],
    )
    summ = report.summary()
    write_csv(summary, ["variant", "n_c", "tau", "normalize", "reps", "failed", "mean_auc", "sd_auc"], summ)
    by_nc = len(args.nc_list) >= len(args.tau_list)
    series = {}
    for rec in summ:
        x = rec["n_c"] if by_nc else rec["tau"]
        series.setdefault(rec["variant"], []).append((float(x), rec["mean_auc"], rec["sd_auc"]))
    title = f"{'normalized' if args.normalize else 'raw'} data"
    with open(plot, "w") as fh:
        fh.write(svg_line_plot(series, "n_c" if by_nc else "tau", "AUC", title))
    write_manifest(manifest, "synth", _config_of(args), __version__, started, now(), [cells, summary, plot])
    return EXIT_FAIL if any(r.failed for r in report.rows) else EXIT_OK


def _read_data_list(path):
    base = os.path.dirname(os.path.abspath(path))
    triples = []
    with open(path) as fh:
        for line in fh:
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ConfigError(f"{path}: expected 'img1 img2 flow', got {line.strip()!r}")
            triples.append(tuple(p if os.path.isabs(p) else os.path.join(base, p) for p in parts))
    if not triples:
        raise ConfigError(f"{path}: no training pairs listed")
    return triples


def cmd_train(args):
    if not args.data:
        raise ConfigError("--data is required")
    if not os.path.exists(args.data):
        raise ConfigError(f"data list {args.data} not found")
    triples = _read_data_list(args.data)
    for t in triples:
        for path in t:
            if not os.path.exists(path):
                raise ConfigError(f"missing data file {path}")
    if args.epochs < 1 or args.batch < 2 or args.samples < 2:
        raise ConfigError("--epochs >= 1, --batch >= 2 and --samples >= 2 required")
    loss_cfg = LossConfig(Variant.parse(args.variant), args.margin, args.lam)
    data = [(normalize_image(read_pgm(a)), normalize_image(read_pgm(b)), read_pbfl1(f)) for a, b, f in triples]

    started = now()
    init_rng = substream(args.seed, "init")
    if args.arch == "full":
        model = full_patch_encoder(init_rng)
    else:
        model = toy_patch_encoder(init_rng, patch=args.patch)
    per_image = -(-args.samples // len(data))

    def sampler(epoch):
        rng = substream(args.seed, "data", epoch)
        parts = [sample_pairs(a, b, f, model.input_shape[-1], per_image, rng, args.max_shift) for a, b, f in data]
        return PairBatch(
            np.concatenate([p.left for p in parts]),
            np.concatenate([p.right for p in parts]),
            np.concatenate([p.labels for p in parts]),
        )

    opt = AdaDelta(model.parameters())
    shuffle = substream(args.seed, "shuffle")
    history = []
    losses_path = os.path.splitext(args.out)[0] + "_losses.csv"
    manifest = os.path.splitext(args.out)[0] + "_manifest.txt"
    status = EXIT_OK
    for epoch in range(args.epochs):
        try:
            history += train(model, loss_cfg, None, 1, shuffle, args.batch, opt, sampler=lambda _: sampler(epoch))
        except DivergenceError:
            log.error("non-finite loss in epoch %d; keeping the last good checkpoint", epoch)
            status = EXIT_FAIL
            break
        checkpoint.save(model, args.out)
        log.info("epoch %d loss %.6g", epoch, history[-1])
    write_csv(losses_path, ["epoch", "loss"], [{"epoch": i, "loss": v} for i, v in enumerate(history)])
    outputs = [args.out, losses_path] if history else [losses_path]
    write_manifest(manifest, "train", _config_of(args), __version__, started, now(), outputs)
    return status


def cmd_flow(args):
    for flag in ("model", "img1", "img2"):
        path = getattr(args, flag)
        if not path:
            raise ConfigError(f"--{flag} is required")
        if not os.path.exists(path):
            raise ConfigError(f"--{flag}: {path} not found")
    if args.gt and not os.path.exists(args.gt):
        raise ConfigError(f"--gt: {args.gt} not found")
    started = now()
    model = checkpoint.load(args.model)
    img1, img2 = read_pgm(args.img1), read_pgm(args.img2)
    gt = read_pbfl1(args.gt) if args.gt else None
    cfg = PipelineConfig(
        match=MatchConfig(args.iters, args.radius, args.cc_area, args.border, args.seed),
        k=args.k,
        kappa=args.kappa,
        downsample=args.downsample,
        seed=args.seed,
    )
    result = run_flow(img1, img2, model, cfg, gt)
    prefix = args.out_prefix
    directory = os.path.dirname(os.path.abspath(prefix))
    os.makedirs(directory, exist_ok=True)
    paths = {k: f"{prefix}_{k}" for k in ("raw.pbfl", "sparse.pbfl", "dense.pbfl", "metrics.csv")}
    write_pbfl1(paths["raw.pbfl"], result.raw)
    write_pbfl1(paths["sparse.pbfl"], result.sparse)
    write_pbfl1(paths["dense.pbfl"], result.dense)
    row = {f"n_{k}": v for k, v in result.stage_counts.items()}
    if result.sparse_metrics is not None:
        row.update(result.sparse_metrics.as_row("sparse_"))
    if result.dense_metrics is not None:
        row.update(result.dense_metrics.as_row("dense_"))
    write_csv(paths["metrics.csv"], list(row), [row])
    write_manifest(f"{prefix}_manifest.txt", "flow", _config_of(args), __version__, started, now(), list(paths.values()))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "flow": cmd_flow}


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"patchbatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"patchbatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"patchbatch: stage {exc.stage} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (PatchBatchError, OSError) as exc:
        print(f"patchbatch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
