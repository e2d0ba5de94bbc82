"""Command-line interface: ``stdpsim {train,infer,quantize,dse,inspect}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable or malformed input, nothing to infer with), 3 numerical fault.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from stdpsim.config import RunConfig, load_config
from stdpsim.dse import DSE_HEADER
from stdpsim.errors import ConfigurationError, InferenceError, NumericalFault, ParseError, StdpSimError
from stdpsim.evaluation import UNASSIGNED, energy_proxy, memory_report
from stdpsim.idx import IdxDataset, load_idx
from stdpsim.modelfile import load_model, save_model
from stdpsim.pipeline import dse_search, evaluate_model, train_and_assign
from stdpsim.quantize import SWEEP_HEADER, parse_formats, quantize_model, sweep_quantization, weight_format
from stdpsim import reports
from stdpsim.training import METRICS_HEADER

log = logging.getLogger("stdpsim")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

MNIST_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_help()}")


class DataError(Exception):
    pass


def _global_flags(top: bool) -> argparse.ArgumentParser:
    # accepted before or after the subcommand; the subcommand copies must not
    # reset values given before it, hence SUPPRESS there
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=d(None), help="key = value run configuration file")
    p.add_argument("--seed", type=int, default=d(None), help="override the configured seed")
    p.add_argument("--out", type=Path, default=d(Path(".")), help="output directory (created if missing)")
    p.add_argument("--quiet", action="store_true", default=d(False), help="only print errors")
    return p


def _dataset_flags(p: argparse.ArgumentParser, split: str, prefix: str = ""):
    dash = f"{prefix}-" if prefix else ""
    p.add_argument(f"--{dash}images", type=Path, help="IDX image file")
    p.add_argument(f"--{dash}labels", type=Path, help=f"IDX label file ({split} set)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stdpsim", description="Unsupervised STDP spiking network toolkit.",
                     parents=[_global_flags(True)])
    g = _global_flags(False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", parents=[g], help="train a network and save it with its class labels")
    _dataset_flags(p, "train")
    p.add_argument("--data-dir", type=Path, help="directory holding the standard MNIST file names")
    p.add_argument("--model-name", default="model.fspn")

    p = sub.add_parser("infer", parents=[g], help="accuracy and confusion matrix of a saved model")
    p.add_argument("--model", type=Path, required=True)
    _dataset_flags(p, "test")
    p.add_argument("--data-dir", type=Path)

    p = sub.add_parser("quantize", parents=[g], help="accuracy and size across wordlengths")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--formats", default=None, help='comma-separated wordlengths, e.g. "4,8,16,32"; "ref" = float32')
    _dataset_flags(p, "test")
    p.add_argument("--data-dir", type=Path)

    p = sub.add_parser("dse", parents=[g], help="budgeted search over network sizes")
    _dataset_flags(p, "train", "train")
    _dataset_flags(p, "test", "test")
    p.add_argument("--data-dir", type=Path)

    p = sub.add_parser("inspect", parents=[g], help="weight mosaic and summary of a saved model")
    p.add_argument("--model", type=Path, required=True)
    return parser


# --- helpers -----------------------------------------------------------------

def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _dataset(args, split: str, images: Path | None, labels: Path | None) -> IdxDataset:
    if images is None or labels is None:
        if args.data_dir is None:
            raise UsageError(f"{args.command}: give --images/--labels or --data-dir for the {split} set")
        names = MNIST_NAMES[split]
        images = images or _find(args.data_dir, names[0])
        labels = labels or _find(args.data_dir, names[1])
    try:
        return load_idx(images, labels)
    except OSError as exc:
        raise DataError(f"cannot read dataset: {exc}") from exc


def _find(d: Path, name: str) -> Path:
    for cand in (d / name, d / f"{name}.gz"):
        if cand.exists():
            return cand
    return d / name


def _load_model(path: Path, cfg: RunConfig):
    try:
        return load_model(path, cfg.neuron_params(), cfg.inhibitory_params(), **_file_overrides(cfg))
    except OSError as exc:
        raise DataError(f"cannot read model: {exc}") from exc


def _file_overrides(cfg: RunConfig) -> dict:
    # parameters the model file does not store come from the config
    return dict(g_exc_strength=cfg.g_exc_strength, w_max=cfg.w_max, w_init_max=cfg.w_init_max,
                exc_inh_strength=cfg.exc_inh_strength, inh_exc_strength=cfg.inh_exc_strength,
                reset_potential=cfg.reset_potential)


def _say(args, msg: str):
    if not args.quiet:
        print(msg)


# --- subcommands -------------------------------------------------------------

def cmd_train(args, cfg: RunConfig) -> int:
    data = _dataset(args, "train", args.images, args.labels)
    out = args.out
    (out / "config.cfg").write_text(cfg.dumps())
    with reports.CsvStream(out / "metrics.csv", METRICS_HEADER) as stream:
        model = train_and_assign(cfg, data.flat, data.labels, on_metrics=lambda r: stream.write(r.row()))
    fmt = weight_format(cfg.model_wordlength, cfg.w_max) if cfg.model_wordlength else None
    net = quantize_model(model.network, fmt, cfg.quantization_policy()) if fmt else model.network
    save_model(net, model.assignment, out / args.model_name)
    reports.plot_training_curve({"training": model.training.curve}, out / "training_curve.png")
    reports.write_pgm(out / "weights.pgm", reports.weight_grid(net.w, w_max=cfg.w_max))
    last = model.training.metrics[-1]
    _say(args, f"trained on {last.samples_seen} samples; last-interval accuracy {last.accuracy:.4f}; "
               f"{model.assignment.n_assigned}/{cfg.n_exc} neurons labelled; model -> {out / args.model_name}")
    return EXIT_OK


def cmd_infer(args, cfg: RunConfig) -> int:
    net, asg = _load_model(args.model, cfg)
    data = _dataset(args, "test", args.images, args.labels)
    res = evaluate_model(cfg, net, asg, data.flat, data.labels)
    out = args.out
    reports.write_csv(out / "inference.csv", ("n", "accuracy", "low_confidence", "proxy_energy"),
                      [(res.n, repr(res.accuracy), res.low_confidence, repr(energy_proxy(res.counters).total))])
    (out / "confusion.txt").write_text(reports.confusion_text(res.confusion))
    reports.plot_confusion(res.confusion, out / "confusion.png")
    _say(args, f"accuracy {res.accuracy:.4f} on {res.n} images")
    _say(args, reports.confusion_text(res.confusion).rstrip())
    return EXIT_OK


def cmd_quantize(args, cfg: RunConfig) -> int:
    net, asg = _load_model(args.model, cfg)
    if asg.n_assigned == 0:
        raise InferenceError("model has no labelled neurons; inference is impossible")
    data = _dataset(args, "test", args.images, args.labels)
    formats = parse_formats(args.formats or cfg.wordlengths)
    n = min(cfg.n_test, len(data))
    rows = sweep_quantization(net, asg, data.flat[:n], data.labels[:n], cfg.encoding_params(), formats,
                              policy=cfg.quantization_policy(), threads=cfg.threads)
    reports.write_csv(args.out / "quantization.csv", SWEEP_HEADER,
                      [(r.wordlength, r.n_f, repr(r.accuracy), repr(r.model_bytes)) for r in rows])
    reports.plot_quantization(rows, args.out / "quantization.png")
    for r in rows:
        _say(args, f"{r.wordlength:>3} bits  accuracy {r.accuracy:.4f}  bytes {r.model_bytes:.0f}")
    return EXIT_OK


def cmd_dse(args, cfg: RunConfig) -> int:
    train = _dataset(args, "train", args.train_images, args.train_labels)
    test = _dataset(args, "test", args.test_images, args.test_labels)
    best, records = dse_search(cfg, train.flat, train.labels, test.flat, test.labels)
    reports.write_csv(args.out / "dse.csv", DSE_HEADER, [r.row() for r in records])
    if records:
        reports.plot_dse(records, args.out / "dse.png")
    if best is None:
        _say(args, "no candidate satisfied the budget")
        return EXIT_OK
    q = quantize_model(best.model.network, cfg.dse_wordlength, cfg.quantization_policy())
    save_model(q, best.model.assignment, args.out / "best_model.fspn")
    _say(args, f"best n_exc={best.n_exc} accuracy {best.accuracy:.4f} bytes {best.bytes:.0f}")
    return EXIT_OK


def cmd_inspect(args, cfg: RunConfig) -> int:
    net, asg = _load_model(args.model, cfg)
    grid = reports.weight_grid(net.w, w_max=net.weights.w_m)
    reports.write_pgm(args.out / "weights.pgm", grid)
    reports.plot_weight_grid(grid, args.out / "weights.png")
    c = net.config
    wl = net.fmt.wordlength if net.fmt is not None else None
    mem = memory_report(net, wl)
    hist = np.bincount(asg.labels[asg.labels != UNASSIGNED], minlength=10)
    lines = [
        f"n_input = {c.n_input}",
        f"n_exc = {c.n_exc}",
        f"inhibition_mode = {c.inhibition_mode.value}",
        f"inhibition_ratio = {c.inhibition_ratio}",
        f"wordlength = {wl if wl is not None else 'reference'}",
        f"seed = {c.seed}",
        f"assigned_neurons = {asg.n_assigned}",
        "neurons_per_class = " + ",".join(str(int(v)) for v in hist),
        f"weight_mean = {float(net.w.mean())!r}",
        f"theta_mean = {float(net.exc.theta.mean())!r}",
        f"model_bytes = {mem.total_bytes!r}",
    ]
    (args.out / "summary.txt").write_text("\n".join(lines) + "\n")
    _say(args, "\n".join(lines))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "infer": cmd_infer, "quantize": cmd_quantize, "dse": cmd_dse,
            "inspect": cmd_inspect}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, InferenceError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except StdpSimError as exc:
        cause = exc.__cause__
        if isinstance(cause, NumericalFault):
            print(f"numerical fault: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
