"""Command line entry point: image tree in, feature CSV out."""

import argparse
import sys
from pathlib import Path

from .augment import augment_class
from .export import export_features, load_image_dir
from .models import MODEL_DIMS, ExtractorSpec, extract_features
from .preprocess import preprocess_image
from .records import AugmentError, ExtractorError, PreprocessError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Extract deep features from a class-per-directory image "
                    "tree into the CSV + manifest interchange format.")
    parser.add_argument("--data", required=True,
                        help="root directory with one subdirectory per class")
    parser.add_argument("--model", required=True, choices=sorted(MODEL_DIMS),
                        help="backbone to extract with")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--augment-benign", action="store_true",
                        help="top up the Benign class to the largest class size")
    parser.add_argument("--seed", type=int, default=0,
                        help="augmentation / random-weights seed (default 0)")
    parser.add_argument("--batch", type=int, default=16,
                        help="inference batch size (default 16)")
    parser.add_argument("--weights", choices=("pretrained", "random"),
                        default="pretrained",
                        help="ImageNet weights, or a seeded random init "
                             "for offline smoke runs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        records = [preprocess_image(r) for r in load_image_dir(args.data)]
        if args.augment_benign:
            before = len(records)
            records = augment_class(records, target_class="Benign",
                                    seed=args.seed)
            print(f"augmented Benign: {len(records) - before} new records")
        spec = ExtractorSpec.of(args.model)
        matrix = extract_features(records, spec, batch_size=args.batch,
                                  weights=args.weights, seed=args.seed)
        out = Path(args.out) / f"{args.model}.csv"
        csv_path, manifest_path = export_features(matrix, records, spec, out)
    except (PreprocessError, AugmentError, ExtractorError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {csv_path} ({matrix.shape[0]} rows x {matrix.shape[1]} features)")
    print(f"wrote {manifest_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
