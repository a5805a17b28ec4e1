"""Command-line entry point: ``supergaze <verb> [options]``.

Verbs are ``rectify``, ``train``, ``eval``, ``cross-eval``, ``plot`` and
``inspect``. Every invocation writes ``command.json`` (the resolved
options) and ``supergaze.log`` into its run directory.

Exit codes: 0 success, 2 usage error, 3 config or input file not found,
4 schema or configuration violation, 5 runtime failure.
"""

import argparse
from contextlib import contextmanager
from dataclasses import replace
import json
import logging
import os
from pathlib import Path
import sys
import time

import yaml

from . import data
from .config import VARIANTS, ModelConfig, TrainConfig, config_echo, load_config
from .detectors import get_detector
from .errors import ConfigurationError, LoadError, SuperGazeError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_SCHEMA = 4
EXIT_RUNTIME = 5

DEVICE_ENV = "SUPERGAZE_DEVICE"
SR_FLAGS = {"none": "none", "head": "head", "head-eyecrops": "head_eyecrops", "head-and-eyes": "head_and_eyes"}

logger = logging.getLogger("supergaze")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dataset_args(p, required=True):
    p.add_argument("--dataset", required=required,
                   help="format name (gaze360, gfie, jsonl) or a path to a .jsonl annotation file")
    p.add_argument("--root", help="dataset root directory (images are resolved against it)")


def _run_dir_arg(p):
    p.add_argument("--run-dir", help="directory for the config echo, logs and outputs")


def build_parser():
    parser = _Parser(prog="supergaze", description="Gaze estimation with dual head-eye cross-attention.")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("rectify", help="re-detect faces whose annotated centre is off the valid cluster")
    _dataset_args(p)
    _run_dir_arg(p)
    p.add_argument("--out", required=True, help="rectified annotations (.jsonl)")
    p.add_argument("--intervals", help="YAML/JSON file overriding the valid centre intervals")
    p.add_argument("--detector", default="blob")
    p.add_argument("--drop-unrecovered", action="store_true")

    p = sub.add_parser("train", help="train one or more models")
    p.add_argument("--config", help="YAML run configuration; flags override its values")
    _dataset_args(p, required=False)
    _run_dir_arg(p)
    p.add_argument("--mode", choices=("static", "temporal"))
    p.add_argument("--sr", choices=tuple(SR_FLAGS))
    p.add_argument("--attention", choices=VARIANTS)
    p.add_argument("--backbone", choices=("resnet18", "toy"))
    p.add_argument("--no-pretrained", action="store_true")
    p.add_argument("--enhancer")
    p.add_argument("--detector")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--device")
    p.add_argument("--selection", choices=("final", "best_val"))
    p.add_argument("--warm-start", help="checkpoint whose matching tensors initialise the model")
    p.add_argument("--exclude-unrecovered", action="store_true",
                   help="drop training frames that have no face box")
    p.add_argument("--sr-cache", help="directory of precomputed enhanced images")

    for verb, helptext in (("eval", "evaluate a checkpoint on a dataset"),
                           ("cross-eval", "evaluate a checkpoint on a dataset it was not trained on")):
        p = sub.add_parser(verb, help=helptext)
        p.add_argument("--checkpoint", required=True)
        _dataset_args(p)
        _run_dir_arg(p)
        p.add_argument("--subset", default="test", help="annotation subset to evaluate (or 'all')")
        p.add_argument("--out", help="report path (default: <run-dir>/report.json)")
        p.add_argument("--sr-cache")
        if verb == "cross-eval":
            p.add_argument("--train-dataset", required=True, help="name of the dataset the model was trained on")

    p = sub.add_parser("plot", help="polar plot of angular error against yaw")
    p.add_argument("--checkpoint", required=True)
    _dataset_args(p)
    _run_dir_arg(p)
    p.add_argument("--subset", default="test")
    p.add_argument("--out", help="image path (default: <run-dir>/error_vs_yaw.png)")

    p = sub.add_parser("inspect", help="plot the face-centre distribution without modifying data")
    _dataset_args(p)
    _run_dir_arg(p)
    p.add_argument("--intervals")
    p.add_argument("--out", help="image path (default: <run-dir>/face_centers.png)")
    return parser


def _resolve_dataset(name, root):
    """``(format, root, samples)`` from a ``--dataset`` value."""
    path = Path(name)
    if name not in data.FORMATS and (path.suffix == ".jsonl" or path.exists()):
        fmt = data.detect_format(path)
        source = path
        root = Path(root) if root else (path.parent if path.is_file() else path)
    else:
        if name not in data.FORMATS:
            raise ConfigurationError(f"unknown dataset {name!r}; give one of {data.FORMATS} or a .jsonl path")
        if root is None:
            raise ConfigurationError("--root is required with a dataset format name")
        fmt, root = name, Path(root)
        source = root
    if not Path(source).exists():
        raise FileNotFoundError(f"dataset not found: {source}")
    return fmt, root, data.load_dataset(source, fmt)


def _subset(samples, name):
    if name == "all":
        return list(samples)
    return [s for s in samples if s.subset == name]


def _run_dir(args):
    if args.run_dir:
        path = Path(args.run_dir)
    elif getattr(args, "out", None):
        path = Path(args.out).parent
    else:
        path = Path("runs") / f"{args.verb}-{time.strftime('%Y%m%d-%H%M%S')}"
    path.mkdir(parents=True, exist_ok=True)
    return path


@contextmanager
def _recorded(args, run_dir, extra=None):
    """Write the command echo and mirror log records into ``run_dir`` while the block runs."""
    echo = dict(vars(args))
    echo.update(extra or {})
    (run_dir / "command.json").write_text(json.dumps(echo, indent=2, default=str), encoding="utf-8")
    handler = logging.FileHandler(run_dir / "supergaze.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(handler)
    try:
        yield
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()


def _image_loader(root):
    from .imaging import load_image

    return lambda sample: load_image(Path(root) / sample.image_path)


def cmd_rectify(args):
    with _recorded(args, _run_dir(args)):
        return _rectify(args)


def _rectify(args):
    fmt, root, samples = _resolve_dataset(args.dataset, args.root)
    intervals = data.ValidIntervals.from_file(args.intervals) if args.intervals else data.ValidIntervals()
    detector = get_detector(args.detector)
    if detector is None:
        raise ConfigurationError("rectify needs an image detector, not 'annotation'")
    out, report = data.rectify(samples, intervals, detector, _image_loader(root),
                               drop_unrecovered=args.drop_unrecovered)
    path = data.save_jsonl(out, args.out)
    report.save(path.with_suffix(".report.json"))
    logger.info("rectified %d of %d invalid frames -> %s", report.total("redetected"), report.total("invalid"), path)
    print(json.dumps(report.to_dict()["totals"]))
    return EXIT_OK


def _configs(args):
    if args.config:
        cfg = load_config(args.config)
        model_cfg, train_cfg, data_cfg = cfg["model"], cfg["train"], cfg["data"]
    else:
        model_cfg, train_cfg, data_cfg = ModelConfig(), TrainConfig(), {}
    model_kw = {}
    for flag, key in (("mode", "mode"), ("backbone", "backbone"), ("enhancer", "enhancer"), ("detector", "detector")):
        if getattr(args, flag) is not None:
            model_kw[key] = getattr(args, flag)
    if args.sr is not None:
        model_kw["sr_config"] = SR_FLAGS[args.sr]
    if args.no_pretrained:
        model_kw["pretrained"] = False
    if args.attention is not None:
        model_kw["dheca"] = replace(model_cfg.dheca, variant=args.attention)
    model_cfg = replace(model_cfg, **model_kw)
    train_kw = {}
    for flag, key in (("seed", "seed"), ("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "learning_rate"),
                      ("device", "device"), ("selection", "selection"), ("warm_start", "warm_start")):
        if getattr(args, flag) is not None:
            train_kw[key] = getattr(args, flag)
    if args.exclude_unrecovered:
        train_kw["exclude_unrecovered"] = True
    if "device" not in train_kw and os.environ.get(DEVICE_ENV):
        train_kw["device"] = os.environ[DEVICE_ENV]
    train_cfg = replace(train_cfg, **train_kw)
    if args.dataset:
        data_cfg = {**data_cfg, "dataset": args.dataset}
    if args.root:
        data_cfg = {**data_cfg, "root": args.root}
    if "dataset" not in data_cfg:
        raise ConfigurationError("no dataset: pass --dataset or set data.dataset in the config")
    return model_cfg, train_cfg, data_cfg


def cmd_train(args):
    from .evaluation import aggregate, evaluate, load_predictor
    from .training import completed, multi_run

    if args.runs < 1:
        raise ConfigurationError("--runs must be >= 1")
    model_cfg, train_cfg, data_cfg = _configs(args)
    run_dir = _run_dir(args)
    with _recorded(args, run_dir, {"resolved": config_echo(model_cfg, train_cfg, data_cfg)}):
        fmt, root, samples = _resolve_dataset(data_cfg["dataset"], data_cfg.get("root"))
        train_samples = _subset(samples, "train")
        if train_cfg.exclude_unrecovered:
            train_samples = [s for s in train_samples if s.face_box is not None]
        val = _subset(samples, "val")
        test = _subset(samples, "test")
        records = multi_run(model_cfg, train_cfg, train_samples, root, run_dir, runs=args.runs,
                            val_samples=val or None, sr_cache=args.sr_cache)
        done = completed(records)
        if not done:
            raise SuperGazeError("all training runs failed")
        summary = {"runs": [{"seed": r.seed, "status": r.status, "checkpoint": r.checkpoint,
                             "final_loss": r.train_loss[-1] if r.train_loss else None, "error": r.error}
                            for r in records]}
        if test:
            reports = []
            for r in done:
                predictor, mode = load_predictor(r.checkpoint, root, sr_cache=args.sr_cache)
                items = test if mode == "static" else data.temporal_windows(test)
                reports.append(evaluate(predictor, items, train_dataset=fmt, test_dataset=fmt))
            agg = aggregate(reports)
            agg.save(run_dir / "report.json")
            summary["test"] = agg.means
        (run_dir / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
        print(json.dumps(summary))
    return EXIT_OK


def _predict_setup(args):
    from .evaluation import load_predictor

    fmt, root, samples = _resolve_dataset(args.dataset, args.root)
    if not Path(args.checkpoint).is_file():
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    predictor, mode = load_predictor(args.checkpoint, root, sr_cache=getattr(args, "sr_cache", None))
    chosen = _subset(samples, args.subset)
    items = data.temporal_windows(chosen) if mode == "temporal" else chosen
    if not items:
        raise SuperGazeError(f"no items to evaluate in subset {args.subset!r}")
    return fmt, predictor, items


def cmd_eval(args):
    from .evaluation import evaluate, render_table

    run_dir = _run_dir(args)
    with _recorded(args, run_dir):
        fmt, predictor, items = _predict_setup(args)
        train_name = getattr(args, "train_dataset", None) or fmt
        report = evaluate(predictor, items, train_dataset=train_name, test_dataset=fmt)
        report.save(args.out or run_dir / "report.json")
        print(render_table([report]))
    return EXIT_OK


def cmd_plot(args):
    from .evaluation import plot_error_vs_yaw

    run_dir = _run_dir(args)
    with _recorded(args, run_dir):
        _, predictor, items = _predict_setup(args)
        print(plot_error_vs_yaw(items, predictor, args.out or run_dir / "error_vs_yaw.png"))
    return EXIT_OK


def cmd_inspect(args):
    run_dir = _run_dir(args)
    with _recorded(args, run_dir):
        _, _, samples = _resolve_dataset(args.dataset, args.root)
        intervals = data.ValidIntervals.from_file(args.intervals) if args.intervals else data.ValidIntervals()
        path = data.plot_face_centers(samples, intervals, args.out or run_dir / "face_centers.png")
        invalid = sum(1 for s in samples if s.face_box is not None
                      and not intervals.contains(data.box_center(s.face_box), s.subset))
        print(json.dumps({"plot": str(path), "samples": len(samples), "invalid_centres": invalid}))
    return EXIT_OK


COMMANDS = {"rectify": cmd_rectify, "train": cmd_train, "eval": cmd_eval, "cross-eval": cmd_eval,
            "plot": cmd_plot, "inspect": cmd_inspect}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (ConfigurationError, LoadError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, LoadError):
            for rec in exc.records[:10]:
                print(f"  {rec}", file=sys.stderr)
        return EXIT_SCHEMA
    except Exception as exc:
        logger.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
