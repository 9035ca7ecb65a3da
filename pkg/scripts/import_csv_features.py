#!/usr/bin/env python3
"""Convert CSV interchange files into the binary dataset containers.

Feature CSV rows look like `class_id[,train|test],v1,...,vd`; the semantics
CSV holds one `class_id,v1,...,vd` row per class.  The split file gets one
`class_id<TAB>{seen|unseen}` line per class, driven by --unseen.
"""

import argparse

from indzsl.dataset import (
    import_csv,
    write_feature_file,
    write_semantics_file,
    write_split_file,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("features_csv", help="per-sample feature rows")
    parser.add_argument("semantics_csv", help="per-class semantic rows")
    parser.add_argument("--unseen", required=True,
                        help="comma-separated unseen class ids")
    parser.add_argument("--out-features", default="features.bin")
    parser.add_argument("--out-semantics", default="semantics.bin")
    parser.add_argument("--out-splits", default="splits.txt")
    args = parser.parse_args()

    class_ids, features, labels, flags = import_csv(args.features_csv)
    sem_ids, sem_vectors, sem_labels, _ = import_csv(args.semantics_csv)
    if len(sem_labels) != len(sem_ids):
        parser.error("semantics CSV must contain exactly one row per class")
    unseen = {c.strip() for c in args.unseen.split(",") if c.strip()}
    unknown = unseen - set(class_ids)
    if unknown:
        parser.error(f"--unseen names unknown classes: {sorted(unknown)}")
    seen = [c for c in class_ids if c not in unseen]

    write_feature_file(args.out_features, class_ids, features, labels, flags)
    write_semantics_file(args.out_semantics, sem_ids, sem_vectors)
    write_split_file(args.out_splits, seen, sorted(unseen))
    print(f"wrote {args.out_features} ({len(features)} samples, "
          f"{features.shape[1]} dims), {args.out_semantics} "
          f"({len(sem_ids)} classes), {args.out_splits}")


if __name__ == "__main__":
    main()
