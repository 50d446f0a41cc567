"""Command line entry point.

Example:

    gradcam-export --model model.pt --images images.npz \
        --attributes smiling,male --maps attn.aiou --predictions scores.csv

The model file is a TorchScript archive or a pickled nn.Module; the images
file is an .npz mapping image id to a (C, H, W) float array preprocessed to
the model's input size.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
import torch

from .errors import ExporterError
from .export import ExportSpec, export


def load_model(path: str) -> torch.nn.Module:
    try:
        return torch.jit.load(path, map_location="cpu")
    except RuntimeError:
        return torch.load(path, map_location="cpu", weights_only=False)


def load_images(path: str) -> dict[str, torch.Tensor]:
    archive = np.load(path)
    images = {}
    for image_id in archive.files:
        data = np.asarray(archive[image_id], dtype=np.float32)
        if data.ndim != 3:
            raise ValueError(f"image {image_id!r} must be (C, H, W), got {data.shape}")
        images[image_id] = torch.from_numpy(data)
    return images


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradcam-export",
        description="Export GradCAM attention maps as an AIOU container",
    )
    parser.add_argument("--model", required=True, help="TorchScript or pickled module")
    parser.add_argument("--images", required=True, help=".npz of id -> (C, H, W) array")
    parser.add_argument("--attributes", required=True,
                        help="comma-separated column names, in logit order")
    parser.add_argument("--layer", default=None,
                        help="dotted module name of the target layer (default: last conv)")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--maps", required=True, help="output container path")
    parser.add_argument("--predictions", default=None, help="output prediction CSV path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ExportSpec(
            model=load_model(args.model),
            images=load_images(args.images),
            attributes=[a for a in args.attributes.split(",") if a],
            layer=args.layer,
            batch_size=args.batch_size,
        )
        with open(args.maps, "wb") as maps_out:
            if args.predictions is not None:
                with open(args.predictions, "w", newline="") as pred_out:
                    count = export(spec, maps_out, pred_out)
            else:
                count = export(spec, maps_out)
    except ExporterError as exc:
        print(f"error: {type(exc).__name__.removesuffix('Error')}: {exc}",
              file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {count} attention records to {args.maps}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
