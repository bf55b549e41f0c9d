"""Command line wrapper mirroring the ExportJob fields."""

from __future__ import annotations

import argparse
import sys

from .export import (
    SCORES_LOGITS,
    SCORES_PROBS,
    ExportError,
    ExportJob,
    export,
    fragment_to_json,
    load_dataset,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predexport",
        description="Run a classifier over a dataset and write divshift prediction/label files.",
    )
    parser.add_argument("--model", required=True, help="import path 'package.module:attr' of the model callable")
    parser.add_argument("--model-id", required=True, help="model id for the manifest fragment")
    parser.add_argument("--data", required=True, help=".npz (arrays x, optional y) or .npy dataset")
    parser.add_argument("--split", required=True, help="split id the predictions belong to")
    parser.add_argument("--out-predictions", required=True, help="output DDPM v1 path")
    parser.add_argument("--out-labels", default=None, help="output labels CSV path (needs y in the dataset)")
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument(
        "--probs",
        action="store_true",
        help="the model emits probabilities instead of logits (implies --no-logits)",
    )
    parser.add_argument(
        "--no-logits", action="store_true", help="do not store the logits block"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        samples, labels = load_dataset(args.data)
        if args.out_labels and labels is None:
            raise ExportError(f"{args.data} has no labels but --out-labels was given")
        job = ExportJob(
            model=args.model,
            model_id=args.model_id,
            split_id=args.split,
            samples=samples,
            labels=labels,
            predictions_path=args.out_predictions,
            labels_path=args.out_labels,
            batch_size=args.batch_size,
            include_logits=not (args.no_logits or args.probs),
            scores=SCORES_PROBS if args.probs else SCORES_LOGITS,
        )
        fragment = export(job)
    except ExportError as exc:
        print(f"predexport: error: {exc}", file=sys.stderr)
        return 1
    print(fragment_to_json(fragment))
    return 0


if __name__ == "__main__":
    sys.exit(main())
