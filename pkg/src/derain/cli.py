"""Command-line interface: train / infer / eval / rcp / synth / info.

Exit codes: 0 success, 1 internal error, 2 bad arguments or files,
3 data errors. Subcommands write nothing on failure: inputs are decoded
up front and every output file lands via an atomic rename.
"""

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import torch

from .data import (
    SynthRainParams,
    load_image,
    load_pairs,
    pad_to_multiple,
    save_image,
    scan_image_dir,
    synth_rain,
    unpad,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DatasetError,
    DecodeError,
    InvalidInputError,
    ShapeError,
    TrainingDiverged,
)
from .metrics import MetricReport, luminance, psnr, ssim
from .model import (
    DerainNet,
    load_checkpoint,
    model_from_checkpoint,
    parameter_breakdown,
)
from .rcp import residue_channel
from .trainer import model_config_from_dict, train, train_config_from_dict

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="derain",
        description="Prior-guided multi-stage single-image deraining.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config file")
    p.add_argument("--config", required=True, help="JSON file with model/train/data_root keys")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("--out-dir", default="runs", help="directory for checkpoints and logs")

    p = sub.add_parser("infer", help="run a checkpoint on an image or directory")
    p.add_argument("--weights", required=True, help="checkpoint file")
    p.add_argument("--input", required=True, help="image file or directory of images")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--save-stages", action="store_true", help="also write intermediate stages")

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--report", default=None, help="write the report as structured text")

    p = sub.add_parser("rcp", help="write the residue channel of an image")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("synth", help="render synthetic rainy/clean pairs")
    p.add_argument("--clean-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--params", default=None, help="JSON file of streak parameter ranges")

    p = sub.add_parser("info", help="summarize a config or checkpoint")
    p.add_argument("--weights", default=None)
    p.add_argument("--config", default=None)

    return parser


def _load_json(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc


def _write_text_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def cmd_train(args):
    raw = _load_json(args.config)
    if not isinstance(raw, dict):
        raise ConfigError(f"{args.config}: top level must be an object")
    known = {"model", "train", "data_root", "eval_root"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{args.config}: unknown keys {sorted(unknown)}")
    if "data_root" not in raw:
        raise ConfigError(f"{args.config}: missing required key 'data_root'")
    model_config = model_config_from_dict(raw.get("model", {}))
    train_config = train_config_from_dict(raw.get("train", {}))
    if args.seed is not None:
        train_config = train_config_from_dict({**raw.get("train", {}), "seed": args.seed})
    pairs = load_pairs(raw["data_root"])
    eval_pairs = load_pairs(raw["eval_root"]) if raw.get("eval_root") else None
    result = train(model_config, train_config, pairs, out_dir=args.out_dir, eval_pairs=eval_pairs)
    print(f"trained {len(result.log)} steps; final loss {result.log[-1].loss:.6g}")
    print(f"checkpoint: {result.final_checkpoint}")
    return EXIT_OK


def cmd_infer(args):
    weights = Path(args.weights)
    if not weights.is_file():
        print(f"error: weights file not found: {weights}", file=sys.stderr)
        return EXIT_USAGE
    model = model_from_checkpoint(load_checkpoint(weights))
    model.eval()

    source = Path(args.input)
    if source.is_dir():
        files = list(scan_image_dir(source).values())
    elif source.is_file():
        files = [source]
    else:
        print(f"error: input not found: {source}", file=sys.stderr)
        return EXIT_USAGE
    if not files:
        print(f"error: no images in {source}", file=sys.stderr)
        return EXIT_DATA

    # decode everything first so a bad file cannot leave partial outputs
    bad = []
    images = []
    for f in files:
        try:
            images.append((f.stem, load_image(f)))
        except DecodeError:
            bad.append(str(f))
    if bad:
        print(f"error: undecodable inputs: {bad}", file=sys.stderr)
        return EXIT_DATA

    out_dir = Path(args.output)
    rendered = []
    with torch.no_grad():
        for stem, image in images:
            padded, size = pad_to_multiple(image, model.config.pad_multiple)
            outputs = model(padded)
            if args.save_stages:
                for idx, pred in enumerate(outputs.predictions, start=1):
                    rendered.append(
                        (out_dir / f"{stem}_stage{idx}.png", unpad(pred, size).clamp(0, 1))
                    )
            else:
                rendered.append((out_dir / f"{stem}.png", unpad(outputs.final, size).clamp(0, 1)))
    for path, image in rendered:
        save_image(path, image)
    print(f"wrote {len(rendered)} file(s) to {out_dir}")
    return EXIT_OK


def _matched_images(dir_a, dir_b, label_a, label_b):
    files_a = scan_image_dir(dir_a)
    files_b = scan_image_dir(dir_b)
    unmatched = sorted(set(files_a) ^ set(files_b))
    if unmatched:
        raise DatasetError(f"unmatched keys between {label_a} and {label_b}: {unmatched}")
    return [(key, load_image(files_a[key]), load_image(files_b[key])) for key in files_a]


def cmd_eval(args):
    triples = _matched_images(args.pred_dir, args.gt_dir, "pred-dir", "gt-dir")
    if not triples:
        raise DatasetError("no image pairs to evaluate")
    per_image = {}
    for key, pred, gt in triples:
        if pred.shape != gt.shape:
            raise DatasetError(f"size mismatch for '{key}'")
        pred_y = luminance(pred)
        gt_y = luminance(gt)
        per_image[key] = (psnr(pred_y, gt_y), ssim(pred_y[0, 0], gt_y[0, 0]))
    report = MetricReport.from_per_image(per_image)
    for key, (p, s) in report.per_image.items():
        print(f"{key}\tpsnr {p:.4f}\tssim {s:.4f}")
    print(f"mean\tpsnr {report.mean_psnr:.4f}\tssim {report.mean_ssim:.4f}")
    if args.report:
        payload = {
            "per_image": {k: {"psnr": p, "ssim": s} for k, (p, s) in report.per_image.items()},
            "mean_psnr": report.mean_psnr,
            "mean_ssim": report.mean_ssim,
        }
        _write_text_atomic(args.report, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def cmd_rcp(args):
    source = Path(args.input)
    if not source.is_file():
        print(f"error: input not found: {source}", file=sys.stderr)
        return EXIT_USAGE
    image = load_image(source)
    save_image(args.output, residue_channel(image))
    return EXIT_OK


def _params_from_file(path):
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    known = {f.name for f in fields(SynthRainParams)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown parameter keys {sorted(unknown)}")
    coerced = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    return SynthRainParams(**coerced)


def cmd_synth(args):
    if args.count < 1:
        raise ConfigError(f"--count must be >= 1, got {args.count}")
    params = _params_from_file(args.params) if args.params else SynthRainParams()
    clean_files = list(scan_image_dir(args.clean_dir).items())
    if not clean_files:
        raise DatasetError(f"no images in {args.clean_dir}")
    cleans = [(stem, load_image(path)) for stem, path in clean_files]

    out_root = Path(args.out_dir)
    rendered = []
    for i in range(args.count):
        stem, clean = cleans[i % len(cleans)]
        rng = np.random.default_rng([args.seed, i])
        pair = synth_rain(clean, params, rng, key=f"{i:04d}_{stem}")
        rendered.append(pair)
    for pair in rendered:
        save_image(out_root / "rainy" / f"{pair.key}.png", pair.rainy)
        save_image(out_root / "gt" / f"{pair.key}.png", pair.clean)
    print(f"wrote {len(rendered)} pair(s) to {out_root}")
    return EXIT_OK


def cmd_info(args):
    if not args.weights and not args.config:
        raise ConfigError("info needs --weights or --config")
    if args.weights:
        payload = load_checkpoint(args.weights)
        model = model_from_checkpoint(payload)
        config = model.config
        print(f"checkpoint: {args.weights} (step {payload.get('step', 0)})")
    else:
        raw = _load_json(args.config)
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        section = raw.get("model", raw) if isinstance(raw.get("model", raw), dict) else raw
        config = model_config_from_dict(section)
        model = DerainNet(config)
    total = sum(p.numel() for p in model.parameters())
    print(f"parameters: {total:,}")
    print(f"stages: {config.num_stages}")
    print(f"levels per stage: {config.num_levels}")
    print(f"base channels: {config.base_channels}")
    print("breakdown:")
    for name, count in parameter_breakdown(model).items():
        print(f"  {name:<16s} {count:>12,}")
    return EXIT_OK


_HANDLERS = {
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "rcp": cmd_rcp,
    "synth": cmd_synth,
    "info": cmd_info,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, CheckpointError, InvalidInputError, ShapeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DecodeError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
