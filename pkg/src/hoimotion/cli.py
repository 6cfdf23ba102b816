"""Command line entry point: ``hoimotion <command> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 unreadable or
inconsistent data, 3 numeric failure (non-finite loss or parameters).

Configuration files are JSON with optional ``model``, ``train`` and ``data``
sections. Any field can be overridden with ``--set section.field=value``
(value parsed as JSON), and ``--seed`` sets the single seed from which
initialization, shuffling and dropout all derive.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .autodiff import ShapeError
from .checkpoint import CheckpointError, load_checkpoint, read_header, save_checkpoint
from .data import DataError, MotionSequence, load_sequences, windows_from_sequences, write_sequences
from .evaluate import BaselinePredictor, evaluate, format_table, run_ablation
from .model import ModelConfig, NonFiniteError, count_parameters, forward
from .scene import build_selected_sequence
from .synth import generate_corpus
from .train import TrainConfig, format_loss_curve, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DATA_DEFAULTS = {"stride": 1}

log = logging.getLogger("hoimotion")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# configuration


def _load_config(args) -> dict:
    cfg = {"model": {}, "train": {}, "data": dict(DATA_DEFAULTS)}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        except json.JSONDecodeError as e:
            raise UsageError(f"config {args.config} is not valid JSON: {e}") from None
        unknown = set(raw) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config sections: {sorted(unknown)}")
        for section, values in raw.items():
            cfg[section].update(values)
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot or section not in cfg:
            raise UsageError(f"--set expects section.field=value with section in {sorted(cfg)}, got {item!r}")
        try:
            cfg[section][name] = json.loads(value)
        except json.JSONDecodeError:
            cfg[section][name] = value
    for flag, field in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "lr0")):
        if getattr(args, flag, None) is not None:
            cfg["train"][field] = getattr(args, flag)
    if getattr(args, "seed", None) is not None:
        cfg["train"]["seed"] = args.seed
    return cfg


def _build(cfg: dict) -> tuple[ModelConfig, TrainConfig, dict]:
    try:
        model = ModelConfig.from_dict(cfg["model"])
        training = TrainConfig.from_dict(cfg["train"])
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None
    unknown = set(cfg["data"]) - set(DATA_DEFAULTS)
    if unknown:
        raise UsageError(f"unknown data config fields: {sorted(unknown)}")
    return model, training, cfg["data"]


def _windows(path, t_in: int, t_out: int, stride: int, k: int):
    seqs = load_sequences(path)
    try:
        return windows_from_sequences(seqs, t_in, t_out, stride, k)
    except DataError as e:
        raise DataError(f"{path}: {e} (sequences shorter than {t_in + t_out} frames?)") from None


def _predictor(args):
    if args.checkpoint:
        params, meta = load_checkpoint(args.checkpoint)
        return params, meta.get("train", {}).get("seed"), params.config.t_in, params.config.t_out
    return BaselinePredictor(args.baseline), None, args.t_in, args.t_out


# --------------------------------------------------------------------------
# commands


def cmd_synth_gen(args) -> int:
    seqs = generate_corpus(args.count, seed=args.seed, scenario=args.scenario, noise=args.noise)
    write_sequences(args.out, seqs)
    print(f"wrote {len(seqs)} sequences ({sum(len(s) for s in seqs)} frames) to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    model, training, data = _build(_load_config(args))
    windows = _windows(args.data, model.t_in, model.t_out, data["stride"], model.objects_per_category)
    print(f"training on {len(windows)} windows, seed {training.seed}")
    _, history = train(windows, training, model, checkpoint_path=args.out,
                       progress=lambda r: print(f"epoch {r.epoch:3d}  lr {r.lr:.6f}  loss {r.loss:.6f}"))
    if args.loss_curve:
        Path(args.loss_curve).write_text(format_loss_curve(history), encoding="utf-8")
    print(f"saved {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    predictor, seed, t_in, t_out = _predictor(args)
    k = predictor.config.objects_per_category if args.checkpoint else 0
    windows = _windows(args.data, t_in, t_out, args.stride, k)
    report = evaluate(predictor, windows, tag=args.tag, seed=seed)
    print(format_table([report]), end="")
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_record(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args) -> int:
    model, training, data = _build(_load_config(args))
    try:
        grid = json.loads(Path(args.grid).read_text(encoding="utf-8") if Path(args.grid).is_file() else args.grid)
    except json.JSONDecodeError as e:
        raise UsageError(f"--grid is neither a JSON file nor a JSON object: {e}") from None
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise UsageError("--grid must map config fields to lists of values")
    k = max([model.objects_per_category] + [int(v) for v in grid.get("objects_per_category", [])])
    train_w = _windows(args.data, model.t_in, model.t_out, data["stride"], k)
    test_w = _windows(args.test, model.t_in, model.t_out, args.test_stride, k)
    results = run_ablation(grid, train_w, test_w, model, training)
    print(format_table([r for _, r in results]), end="")
    if args.out:
        records = [dict(point=p, **r.to_record()) for p, r in results]
        Path(args.out).write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _forecast_one(predictor, seq: MotionSequence, t_in: int, t_out: int, k: int, start) -> MotionSequence:
    s = len(seq) - t_in if start is None else start
    if s < 0 or s + t_in > len(seq):
        raise DataError(f"{seq.name}: cannot take {t_in} observed frames from frame {s} of {len(seq)}")
    e = s + t_in
    pose = np.transpose(seq.pose[s:e], (2, 1, 0))[None]  # [1, 3, n, t_in]
    if isinstance(predictor, BaselinePredictor):
        future = predictor.predict(pose, t_out)[0]
    else:
        head = seq.head_dir[s:e].T[None]
        if k > 0:
            sel = build_selected_sequence(seq.objects[s:e], seq.viewports()[s:e], k)
            dyn, stat = sel.dynamic[None], sel.static[None]
        else:
            dyn = stat = np.zeros((1, 3, 8, 0, t_in))
        future = forward(predictor, pose, head, dyn, stat, mode="eval").data[0]
    step = int(seq.frames[-1] - seq.frames[-2]) if len(seq) > 1 else 1
    frames = np.concatenate([seq.frames[s:e], seq.frames[e - 1] + step * np.arange(1, t_out + 1)])
    last = e - 1
    return MotionSequence(
        np.concatenate([seq.pose[s:e], np.transpose(future, (2, 1, 0))]),
        np.concatenate([seq.head_dir[s:e], np.repeat(seq.head_dir[last:e], t_out, axis=0)]),
        np.concatenate([seq.head_pos[s:e], np.repeat(seq.head_pos[last:e], t_out, axis=0)]),
        list(seq.objects[s:e]) + [seq.objects[last]] * t_out,
        frames, seq.fps, f"{seq.name}-forecast",
    )


def cmd_forecast(args) -> int:
    predictor, _, t_in, t_out = _predictor(args)
    k = predictor.config.objects_per_category if args.checkpoint else 0
    seqs = load_sequences(args.data)
    n = predictor.config.n_joints if args.checkpoint else None
    out = []
    for seq in seqs:
        if n is not None and seq.n_joints != n:
            raise DataError(f"{seq.name}: {seq.n_joints} joints, checkpoint expects {n}")
        out.append(_forecast_one(predictor, seq, t_in, t_out, k, args.start))
    write_sequences(args.out, out)
    print(f"wrote {len(out)} forecasts ({t_in} observed + {t_out} predicted frames each) to {args.out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    header, _ = read_header(args.checkpoint)
    params, meta = load_checkpoint(args.checkpoint)
    summary = {
        "format": header["format"],
        "version": header["version"],
        "payload_sha256": header["payload_sha256"],
        "parameters": count_parameters(params),
        "arrays": len(header["arrays"]),
        "config": header["config"],
        "meta": meta,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hoimotion", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def configurable(sp):
        sp.add_argument("--config", help="JSON file with model/train/data sections")
        sp.add_argument("--set", action="append", metavar="SECTION.FIELD=VALUE", help="override one config field")
        sp.add_argument("--seed", type=int, help="seed for initialization, shuffling and dropout")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--batch-size", type=int)
        sp.add_argument("--lr", type=float, help="initial learning rate")

    def source(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--checkpoint", help="trained model")
        g.add_argument("--baseline", choices=["zero_velocity", "constant_velocity"])
        sp.add_argument("--t-in", type=int, default=10, help="observed frames (baselines only)")
        sp.add_argument("--t-out", type=int, default=30, help="predicted frames (baselines only)")

    sp = sub.add_parser("synth-gen", help="render synthetic walk-and-reach sequences")
    sp.add_argument("--out", required=True, help=".jsonl or .npz")
    sp.add_argument("--count", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scenario", choices=["walk_reach", "reach"], default="walk_reach")
    sp.add_argument("--noise", type=float, default=0.002, help="joint jitter std in meters")
    sp.set_defaults(func=cmd_synth_gen)

    sp = sub.add_parser("train", help="train a model and write a checkpoint")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.add_argument("--loss-curve", help="write the per-epoch loss table here")
    configurable(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="per-horizon MPJPE of a checkpoint or baseline")
    sp.add_argument("--data", required=True)
    source(sp)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--tag")
    sp.add_argument("--out", help="write the report as JSON")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("ablate", help="retrain and evaluate over a grid of config values")
    sp.add_argument("--data", required=True, help="training sequences")
    sp.add_argument("--test", required=True, help="evaluation sequences")
    sp.add_argument("--grid", required=True, help='JSON object or file, e.g. {"use_head": [true, false]}')
    sp.add_argument("--test-stride", type=int, default=1)
    sp.add_argument("--out", help="write all reports as JSON")
    configurable(sp)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("forecast", help="write observed + predicted frames as a sequence file")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help=".jsonl or .npz")
    sp.add_argument("--start", type=int, help="first observed frame (default: the last t_in frames)")
    source(sp)
    sp.set_defaults(func=cmd_forecast)

    sp = sub.add_parser("inspect-checkpoint", help="print checkpoint header and parameter count")
    sp.add_argument("checkpoint")
    sp.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"hoimotion: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteError as e:
        print(f"hoimotion: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, CheckpointError, ShapeError, OSError) as e:
        print(f"hoimotion: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:  # remaining validation failures come from bad arguments
        print(f"hoimotion: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
