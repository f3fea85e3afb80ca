"""Command-line entry point covering the full workflow.

Subcommands: gen-data, expand-labels, split, train (svm|mlp), evaluate,
infer, gradient-check. Every stochastic subcommand takes --seed and is fully
determined by it. Data inputs accept '-' for standard input. Option
precedence is flags > config file (--config, flat key=value lines) >
defaults. Exit codes: 0 success, 1 usage, 2 data/config error, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, dataset, mlp, streamio, svm, synthgen
from .errors import (
    ConfigError,
    ModelFormatError,
    PersistenceError,
    PoseGuardError,
    StreamError,
)
from .metrics import classification_report, confusion_matrix, render_report
from .pipeline import PipelineConfig, run_stream
from .tracking import TrackerConfig, VelocityRuleConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_DATA_ERRORS = (
    ConfigError,
    ModelFormatError,
    StreamError,
)


class _UsageExit(Exception):
    def __init__(self, message: str):
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here is exit 1 with usage text
    def error(self, message: str):
        raise _UsageExit(f"{self.format_usage()}{self.prog}: error: {message}")


def _open_input(path: str):
    if path == "-":
        return sys.stdin
    try:
        return open(path, "r", encoding="utf-8")
    except OSError as exc:
        # a bad input reference is a configuration problem, not a runtime one
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _open_output(path: str):
    if path == "-":
        return sys.stdout
    try:
        return open(path, "w", encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


def _close(fp) -> None:
    if fp not in (sys.stdin, sys.stdout):
        fp.close()


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with _open_input(path) as fp:
        for lineno, line in enumerate(fp, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = text.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def _merge_options(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Apply precedence flags > config file > defaults."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        raw = _read_config_file(config_path)
        for key, value in raw.items():
            if key not in defaults:
                continue  # keys for other subcommands are allowed in one file
            default = defaults[key]
            if isinstance(default, bool):
                merged[key] = value.lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int) and not isinstance(default, bool):
                merged[key] = int(value)
            elif isinstance(default, float):
                merged[key] = float(value)
            elif default is None:
                merged[key] = _coerce(value)
            else:
                merged[key] = value
    for key, value in vars(args).items():
        if key in ("config", "command", "func"):
            continue
        merged[key] = value
    ns = argparse.Namespace(**merged)
    ns.func = args.func
    return ns


def _load_any_model(path: str, expected: str = "auto"):
    with _open_input(path) as fp:
        first = fp.readline()
        rest = fp.read()
    text = first + rest
    if first.startswith(svm.MODEL_MAGIC):
        kind = "svm"
        model = svm.load_svm(io.StringIO(text))
    elif first.startswith(mlp.MODEL_MAGIC):
        kind = "mlp"
        model = mlp.load_mlp(io.StringIO(text))
    else:
        raise ModelFormatError(f"{path}: unrecognized model file")
    if expected != "auto" and expected != kind:
        raise ConfigError(f"model {path} is {kind}, but --classifier {expected} was requested")
    return kind, model


# -- subcommand implementations ------------------------------------------


GEN_DATA_DEFAULTS = dict(
    mode="dataset",
    out="-",
    n_normal=452,
    n_fight=218,
    frames=300,
    actions="walk,punch",
    fps=30.0,
    noise=None,
    seed=0,
)


def cmd_gen_data(opts) -> int:
    out = _open_output(opts.out)
    try:
        if opts.mode == "dataset":
            noise = 0.015 if opts.noise is None else opts.noise
            samples = synthgen.generate_dataset(opts.n_normal, opts.n_fight, seed=opts.seed, noise_sigma=noise)
            count = dataset.write_feature_csv(samples, out)
            print(f"wrote {count} samples", file=sys.stderr)
        else:
            actions = [a.strip() for a in opts.actions.split(",") if a.strip()]
            if not actions:
                raise ConfigError("--actions must name at least one action")
            actors = tuple(
                synthgen.ActorSpec(action=action, start_position=(220.0 + 300.0 * i, 400.0))
                for i, action in enumerate(actions)
            )
            noise = 0.0 if opts.noise is None else opts.noise
            stream = synthgen.generate_sequence(
                synthgen.ScenarioSpec(
                    duration_frames=opts.frames,
                    actors=actors,
                    fps=opts.fps,
                    noise_sigma=noise,
                    seed=opts.seed,
                )
            )
            count = streamio.write_frames(stream.frames, out)
            print(f"wrote {count} frames", file=sys.stderr)
    finally:
        _close(out)
    return EXIT_OK


EXPAND_LABELS_DEFAULTS = dict(labels="-", out="-")


def cmd_expand_labels(opts) -> int:
    fp = _open_input(opts.labels)
    try:
        rows = dataset.read_interval_labels(fp)
    finally:
        _close(fp)
    mapping = dataset.expand_interval_labels(rows)
    out = _open_output(opts.out)
    try:
        out.write("Session,Frame,Actor,Label\n")
        for (session, frame, actor), label in sorted(mapping.items()):
            out.write(f"{session},{frame},{actor},{label}\n")
    finally:
        _close(out)
    print(f"expanded {len(rows)} intervals to {len(mapping)} labeled frames", file=sys.stderr)
    return EXIT_OK


SPLIT_DEFAULTS = dict(
    features="-",
    train_frac=0.8,
    val_frac=0.1,
    test_frac=0.1,
    seed=0,
    out_train="train.csv",
    out_val="val.csv",
    out_test="test.csv",
)


def cmd_split(opts) -> int:
    fp = _open_input(opts.features)
    try:
        samples = dataset.read_feature_csv(fp)
    finally:
        _close(fp)
    spec = dataset.SplitSpec(opts.train_frac, opts.val_frac, opts.test_frac, seed=opts.seed)
    train, val, test = dataset.stratified_split(samples, spec)
    for path, part in ((opts.out_train, train), (opts.out_val, val), (opts.out_test, test)):
        out = _open_output(path)
        try:
            dataset.write_feature_csv(part, out)
        finally:
            _close(out)
    print(f"split {len(samples)} samples into {len(train)}/{len(val)}/{len(test)}", file=sys.stderr)
    return EXIT_OK


TRAIN_DEFAULTS = dict(
    features="-",
    out="model.txt",
    seed=0,
    kernel="rbf",
    gamma=None,
    c=1.0,
    tolerance=1e-3,
    max_passes=10,
    val=None,
    hidden="64,32",
    dropout=0.5,
    lr=1e-3,
    epochs=20,
    batch_size=20,
)


def cmd_train(opts) -> int:
    fp = _open_input(opts.features)
    try:
        samples = dataset.read_feature_csv(fp)
    finally:
        _close(fp)

    if opts.head == "svm":
        config = svm.SvmConfig(
            kernel=opts.kernel,
            gamma=opts.gamma,
            c=opts.c,
            tolerance=opts.tolerance,
            max_passes=opts.max_passes,
            seed=opts.seed,
        )
        model = svm.train_svm(samples, config)
        out = _open_output(opts.out)
        try:
            svm.save_svm(model, out)
        finally:
            _close(out)
        print(
            f"trained svm on {len(samples)} samples: {len(model.alphas)} support vectors",
            file=sys.stderr,
        )
    else:
        val_samples = []
        if opts.val:
            vfp = _open_input(opts.val)
            try:
                val_samples = dataset.read_feature_csv(vfp)
            finally:
                _close(vfp)
        hidden = tuple(int(h) for h in opts.hidden.split(","))
        config = mlp.MlpConfig(
            hidden_dims=hidden,
            dropout_rate=opts.dropout,
            learning_rate=opts.lr,
            epochs=opts.epochs,
            batch_size=opts.batch_size,
            seed=opts.seed,
        )
        model, history = mlp.train_mlp(samples, val_samples, config)
        out = _open_output(opts.out)
        try:
            mlp.save_mlp(model, out)
        finally:
            _close(out)
        final_acc = history.train_accuracy[-1] if history.train_accuracy else float("nan")
        print(
            f"trained mlp on {len(samples)} samples: final train accuracy {final_acc:.3f}",
            file=sys.stderr,
        )
    return EXIT_OK


EVALUATE_DEFAULTS = dict(
    model="model.txt",
    features="-",
    format="text",
    show_overall_precision=False,
)


def cmd_evaluate(opts) -> int:
    _, model = _load_any_model(opts.model)
    fp = _open_input(opts.features)
    try:
        samples = dataset.read_feature_csv(fp)
    finally:
        _close(fp)
    X, y = dataset.samples_to_arrays(samples)
    predictions = model.predict(X)
    cm = confusion_matrix(y.tolist(), predictions.tolist())
    report = classification_report(cm)
    if opts.format == "machine":
        payload = report.to_dict()
        payload["confusion_matrix"] = {"tn": cm.tn, "fp": cm.fp, "fn": cm.fn, "tp": cm.tp}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(render_report(report, include_overall_precision=opts.show_overall_precision))
    return EXIT_OK


INFER_DEFAULTS = dict(
    model="model.txt",
    classifier="auto",
    inputs=["-"],
    out="-",
    out_dir=None,
    t_warn=0.5,
    t_alert=0.8,
    window=None,  # None: derived from --fps (half a second of frames)
    hysteresis=0.05,
    iou_threshold=0.3,
    grace_frames=0,
    velocity_threshold=0.8,
    velocity_window=5,
    no_velocity_rule=False,
    fps=30.0,
    strict=False,
)


def cmd_infer(opts) -> int:
    _, model = _load_any_model(opts.model, expected=opts.classifier)
    velocity_rule = None
    if not opts.no_velocity_rule:
        velocity_rule = VelocityRuleConfig(
            velocity_threshold=opts.velocity_threshold, window_frames=opts.velocity_window
        )
    config = PipelineConfig(
        t_warn=opts.t_warn,
        t_alert=opts.t_alert,
        smoothing_window=opts.window,
        hysteresis_margin=opts.hysteresis,
        tracker=TrackerConfig(iou_threshold=opts.iou_threshold, grace_frames=opts.grace_frames),
        velocity_rule=velocity_rule,
        expected_fps=opts.fps,
    )

    inputs = list(opts.inputs)
    if len(inputs) > 1:
        if not opts.out_dir:
            raise ConfigError("multiple --in streams need --out-dir")
        out_dir = Path(opts.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        def _one(path: str):
            in_fp = _open_input(path)
            name = Path(path).name if path != "-" else "stdin"
            out_fp = _open_output(str(out_dir / f"{name}.annotated.jsonl"))
            try:
                return path, run_stream(
                    in_fp, model, config, sink=out_fp, strict=opts.strict, diagnostics=sys.stderr
                )
            finally:
                _close(out_fp)
                _close(in_fp)

        # one worker per stream; each stream owns its pipeline state
        with concurrent.futures.ThreadPoolExecutor(max_workers=len(inputs)) as pool:
            for path, summary in pool.map(_one, inputs):
                _print_summary(path, summary)
    else:
        in_fp = _open_input(inputs[0])
        out_fp = _open_output(opts.out)
        try:
            summary = run_stream(
                in_fp, model, config, sink=out_fp, strict=opts.strict, diagnostics=sys.stderr
            )
        finally:
            _close(out_fp)
            _close(in_fp)
        _print_summary(inputs[0], summary)
    return EXIT_OK


def _print_summary(path: str, summary) -> None:
    print(
        f"{path}: {summary.frames_processed} frames, {summary.events_emitted} events, "
        f"{summary.skipped_lines} skipped, {summary.throughput_fps:.1f} fps",
        file=sys.stderr,
    )


GRADIENT_CHECK_DEFAULTS = dict(trials=20, seed=0, threshold=1e-4)


def cmd_gradient_check(opts) -> int:
    rng = np.random.default_rng(opts.seed)
    worst = 0.0
    for trial in range(opts.trials):
        input_dim = int(rng.integers(2, 7))
        hidden = (int(rng.integers(2, 6)), int(rng.integers(2, 6)))
        batch = int(rng.integers(3, 8))
        config = mlp.MlpConfig(
            input_dim=input_dim,
            hidden_dims=hidden,
            dropout_rate=float(rng.choice([0.0, 0.3, 0.5])),
            seed=int(rng.integers(0, 2**31)),
        )
        model = mlp.MlpModel(config)
        X = rng.normal(size=(batch, input_dim))
        y = rng.integers(0, 2, size=batch)
        error = mlp.gradient_check(model, X, y, mask_seed=int(rng.integers(0, 2**31)))
        worst = max(worst, error)
        print(f"trial {trial}: max relative error {error:.3e}", file=sys.stderr)
    print(f"max relative error over {opts.trials} trials: {worst:.3e}")
    if worst >= opts.threshold:
        print(f"FAIL: {worst:.3e} >= threshold {opts.threshold:.1e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# -- argument wiring -------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="poseguard", description=__doc__)
    parser.add_argument("--version", action="version", version=f"poseguard {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    S = argparse.SUPPRESS

    p = sub.add_parser("gen-data", help="generate synthetic feature CSVs or keypoint streams")
    p.add_argument("--config", default=None)
    p.add_argument("--mode", choices=("dataset", "stream"), default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--n-normal", type=int, default=S, dest="n_normal")
    p.add_argument("--n-fight", type=int, default=S, dest="n_fight")
    p.add_argument("--frames", type=int, default=S)
    p.add_argument("--actions", default=S, help="comma-separated actor actions for stream mode")
    p.add_argument("--fps", type=float, default=S)
    p.add_argument("--noise", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.set_defaults(func=(cmd_gen_data, GEN_DATA_DEFAULTS))

    p = sub.add_parser("expand-labels", help="expand interval label rows to per-frame labels")
    p.add_argument("--config", default=None)
    p.add_argument("--labels", default=S)
    p.add_argument("--out", default=S)
    p.set_defaults(func=(cmd_expand_labels, EXPAND_LABELS_DEFAULTS))

    p = sub.add_parser("split", help="stratified train/val/test split of a feature CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--features", default=S)
    p.add_argument("--train-frac", type=float, default=S, dest="train_frac")
    p.add_argument("--val-frac", type=float, default=S, dest="val_frac")
    p.add_argument("--test-frac", type=float, default=S, dest="test_frac")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out-train", default=S, dest="out_train")
    p.add_argument("--out-val", default=S, dest="out_val")
    p.add_argument("--out-test", default=S, dest="out_test")
    p.set_defaults(func=(cmd_split, SPLIT_DEFAULTS))

    p = sub.add_parser("train", help="train a classifier head on a feature CSV")
    p.add_argument("head", choices=("svm", "mlp"))
    p.add_argument("--config", default=None)
    p.add_argument("--features", default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--kernel", choices=("rbf", "linear"), default=S)
    p.add_argument("--gamma", type=float, default=S)
    p.add_argument("--c", type=float, default=S)
    p.add_argument("--tolerance", type=float, default=S)
    p.add_argument("--max-passes", type=int, default=S, dest="max_passes")
    p.add_argument("--val", default=S)
    p.add_argument("--hidden", default=S)
    p.add_argument("--dropout", type=float, default=S)
    p.add_argument("--lr", type=float, default=S)
    p.add_argument("--epochs", type=int, default=S)
    p.add_argument("--batch-size", type=int, default=S, dest="batch_size")
    p.set_defaults(func=(cmd_train, TRAIN_DEFAULTS))

    p = sub.add_parser("evaluate", help="classification report for a model on a feature CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--model", default=S)
    p.add_argument("--features", default=S)
    p.add_argument("--format", choices=("text", "machine"), default=S)
    p.add_argument(
        "--show-overall-precision",
        action="store_true",
        default=S,
        dest="show_overall_precision",
    )
    p.set_defaults(func=(cmd_evaluate, EVALUATE_DEFAULTS))

    p = sub.add_parser("infer", help="run streaming inference over keypoint streams")
    p.add_argument("--config", default=None)
    p.add_argument("--model", default=S)
    p.add_argument("--classifier", choices=("auto", "svm", "mlp"), default=S)
    p.add_argument("--in", action="append", default=S, dest="inputs", metavar="PATH")
    p.add_argument("--out", default=S)
    p.add_argument("--out-dir", default=S, dest="out_dir")
    p.add_argument("--t-warn", type=float, default=S, dest="t_warn")
    p.add_argument("--t-alert", type=float, default=S, dest="t_alert")
    p.add_argument("--window", type=int, default=S)
    p.add_argument("--hysteresis", type=float, default=S)
    p.add_argument("--iou-threshold", type=float, default=S, dest="iou_threshold")
    p.add_argument("--grace-frames", type=int, default=S, dest="grace_frames")
    p.add_argument("--velocity-threshold", type=float, default=S, dest="velocity_threshold")
    p.add_argument("--velocity-window", type=int, default=S, dest="velocity_window")
    p.add_argument("--no-velocity-rule", action="store_true", default=S, dest="no_velocity_rule")
    p.add_argument("--fps", type=float, default=S)
    p.add_argument("--strict", action="store_true", default=S)
    p.set_defaults(func=(cmd_infer, INFER_DEFAULTS))

    p = sub.add_parser("gradient-check", help="verify analytic gradients against finite differences")
    p.add_argument("--config", default=None)
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--threshold", type=float, default=S)
    p.set_defaults(func=(cmd_gradient_check, GRADIENT_CHECK_DEFAULTS))

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        command, defaults = args.func
        opts = _merge_options(args, defaults)
        return command(opts)
    except _UsageExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PoseGuardError as exc:
        # remaining package errors are data problems unless they are I/O
        code = EXIT_RUNTIME if isinstance(exc, PersistenceError) else EXIT_DATA
        print(f"error: {exc}", file=sys.stderr)
        return code
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
