#!/usr/bin/env python3
"""Write the Digits dataset as the CSV layout the training CLI consumes.

The data is the UCI optical-recognition-of-handwritten-digits set (8x8
grayscale, pixel values 0..16, 1797 samples) as redistributed inside
scikit-learn, so no network access is needed. Each row holds 64 integer
pixel columns followed by the label.
"""
import argparse
import csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", nargs="?", default="digits.csv")
    args = parser.parse_args()

    from sklearn.datasets import load_digits

    raw = load_digits()
    with open(args.output, "w", newline="") as handle:
        writer = csv.writer(handle)
        for row, label in zip(raw.data, raw.target):
            writer.writerow([int(v) for v in row] + [int(label)])
    print(f"wrote {len(raw.target)} rows to {args.output}")


if __name__ == "__main__":
    main()
