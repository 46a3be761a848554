"""Command line entry points: train, eval, inpaint, gen-masks, serve.

Exit codes: 0 success, 1 runtime failure (I/O, data, checkpoint), 2 usage or
configuration failure (bad config key, invalid mask parameters, dimension
mismatches).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from regionfill import masks
from regionfill.config import (
    ConfigError,
    _NESTED,
    apply_override,
    build_train_config,
    dump_config,
    load_config_file,
    preset_config,
)
from regionfill.data import CorpusError, build_manifest, load_and_normalize, to_internal, to_metric
from regionfill.features import FeatureError
from regionfill.masks import MaskConfig, MaskError, MaskGenerationError
from regionfill.metrics import MetricError, evaluate_corpus, report_to_csv, report_to_table
from regionfill.training import CheckpointError, TrainConfig, train_loop

log = logging.getLogger("regionfill")


def _schema_help() -> str:
    lines = ["config file schema (YAML): schema_version: 1, then keys under 'train:':"]
    for f in dc_fields(TrainConfig):
        if f.name in _NESTED:
            sub = ", ".join(sf.name for sf in dc_fields(_NESTED[f.name]))
            lines.append(f"  {f.name}: mapping of {{{sub}}}")
        else:
            lines.append(f"  {f.name}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regionfill", description="Region-wise generative image inpainting."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser(
        "train",
        help="run the training loop from a config file",
        epilog=_schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    group = p_train.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="YAML config file path")
    group.add_argument("--preset", help="named built-in config (desk64, full256)")
    p_train.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY.PATH=VALUE",
        help="dotted-key config override, repeatable",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint over a corpus")
    p_eval.add_argument("--checkpoint", help="model checkpoint path")
    p_eval.add_argument("--data-dir", required=True, help="image corpus directory")
    p_eval.add_argument("--mask-dir", required=True, help="directory of mask files")
    p_eval.add_argument("--out-csv", help="write the report as CSV here")
    p_eval.add_argument("--image-size", type=int, default=64)
    p_eval.add_argument(
        "--oracle",
        action="store_true",
        help="score a perfect inpainter instead of a checkpoint (protocol check)",
    )
    p_eval.set_defaults(func=cmd_eval)

    p_inp = sub.add_parser("inpaint", help="inpaint one image with one mask")
    p_inp.add_argument("--image", required=True)
    p_inp.add_argument("--mask", required=True)
    p_inp.add_argument("--checkpoint", required=True)
    p_inp.add_argument("--out", required=True)
    p_inp.set_defaults(func=cmd_inpaint)

    p_gm = sub.add_parser("gen-masks", help="sample mask files")
    p_gm.add_argument("--out-dir", required=True)
    p_gm.add_argument("--count", type=int, default=10)
    p_gm.add_argument("--size", type=int, default=64)
    p_gm.add_argument(
        "--kind", choices=[masks.CONTIGUOUS, masks.DISCONTIGUOUS], default=masks.CONTIGUOUS
    )
    p_gm.add_argument("--ratio", type=float, nargs=2, default=(0.1, 0.4), metavar=("LO", "HI"))
    p_gm.add_argument("--seed", type=int, default=0)
    p_gm.set_defaults(func=cmd_gen_masks)

    p_srv = sub.add_parser("serve", help="run the HTTP inference service")
    p_srv.add_argument("--checkpoint", help="checkpoint to load at startup")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=cmd_serve)
    return parser


def cmd_train(args) -> int:
    doc = preset_config(args.preset) if args.preset else load_config_file(args.config)
    for assignment in args.override:
        apply_override(doc, assignment)
    cfg = build_train_config(doc)
    log.info("training config:\n%s", dump_config(cfg))
    state, reports = train_loop(cfg)
    print(f"trained {state.epoch} epochs, {state.global_step} steps")
    if reports:
        last = reports[-1]
        print(
            f"final epoch means: l_r={last.reconstruction:.5f} "
            f"l_c={last.correlation:.5f} l_s={last.style:.5f} total={last.total:.5f}"
        )
    return 0


def _load_mask_dir(mask_dir: Path, size: int) -> list[np.ndarray]:
    files = sorted(p for p in mask_dir.iterdir() if p.is_file()) if mask_dir.is_dir() else []
    loaded = []
    for p in files:
        try:
            m = masks.load_mask(p)
        except OSError:
            continue
        if m.shape != (size, size):
            import cv2

            m = cv2.resize(m, (size, size), interpolation=cv2.INTER_NEAREST)
        loaded.append(m)
    if not loaded:
        raise CorpusError(f"no usable mask files in {mask_dir}")
    return loaded


def cmd_eval(args) -> int:
    import torch

    from regionfill.nn.regionwise import as_mask_tensor

    size = args.image_size
    if args.oracle:
        inpaint_fn = lambda img, m: img  # noqa: E731 - protocol self-check
    else:
        if not args.checkpoint:
            raise ConfigError("--checkpoint required unless --oracle is given")
        from regionfill.inference import InpaintEngine

        engine = InpaintEngine.from_checkpoint(args.checkpoint)
        size = engine.model_size

        def inpaint_fn(img, m):
            x = to_internal(torch.from_numpy(img).float()[None])
            m_t = as_mask_tensor(m, x)
            with torch.no_grad():
                _, _, _, c2 = engine.generator(x * m_t, m_t)
            return to_metric(c2)[0].numpy()

    manifest = build_manifest(args.data_dir, split="eval", image_size=size)
    images = [
        to_metric(load_and_normalize(Path(args.data_dir) / name, size)).numpy()
        for name in manifest.files
    ]
    mask_files = _load_mask_dir(Path(args.mask_dir), size)
    assigned = [mask_files[i % len(mask_files)] for i in range(len(images))]

    report = evaluate_corpus(inpaint_fn, images, assigned)
    print(report_to_table(report))
    if args.out_csv:
        Path(args.out_csv).write_text(report_to_csv(report), encoding="utf-8")
        print(f"wrote {args.out_csv}")
    return 0


def cmd_inpaint(args) -> int:
    from PIL import Image

    from regionfill.inference import InpaintEngine

    try:
        with Image.open(args.image) as im:
            img = np.asarray(im.convert("RGB"))
    except OSError as exc:
        raise CorpusError(f"cannot read image {args.image}: {exc}") from exc
    m = masks.load_mask(args.mask)
    engine = InpaintEngine.from_checkpoint(args.checkpoint)
    out = engine.inpaint_array(img, m)
    Image.fromarray(out).save(args.out)
    print(f"wrote {args.out} (model {engine.model_id})")
    return 0


def cmd_gen_masks(args) -> int:
    cfg = MaskConfig(kind=args.kind, ratio_range=tuple(args.ratio), rng_seed=args.seed)
    rng = np.random.default_rng(args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        m = masks.generate_mask(args.size, args.size, cfg, rng)
        masks.save_mask(m, out_dir / f"mask_{i:04d}.png")
    print(f"wrote {args.count} masks to {out_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from regionfill.service.app import create_app

    app = create_app(checkpoint=args.checkpoint)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, MaskError, MaskGenerationError, MetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, CheckpointError, FeatureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
