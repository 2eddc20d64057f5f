#!/usr/bin/env python3
"""Export the bundled scikit-learn handwritten-digit images to IDX files.

Writes digits-{train,test}-{images-idx3,labels-idx1}-ubyte into the output
directory, big-endian headers with the standard 2051/2049 magics. Pixels are
rescaled from the source 0..16 range to 0..255. A deterministic 5/6 - 1/6
train/test split is used.
"""

import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def write_images(path: Path, images: np.ndarray) -> None:
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", 2051, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", 2049, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)

    X, y = load_digits(return_X_y=True)
    images = np.round(X.reshape(-1, 8, 8) * (255.0 / 16.0)).astype(np.uint8)
    labels = y.astype(np.uint8)

    rng = np.random.default_rng(20240601)
    order = rng.permutation(len(labels))
    images, labels = images[order], labels[order]
    n_test = len(labels) // 6

    write_images(out / "digits-train-images-idx3-ubyte", images[n_test:])
    write_labels(out / "digits-train-labels-idx1-ubyte", labels[n_test:])
    write_images(out / "digits-test-images-idx3-ubyte", images[:n_test])
    write_labels(out / "digits-test-labels-idx1-ubyte", labels[:n_test])
    print(f"wrote {len(labels) - n_test} train / {n_test} test digit samples to {out}")


if __name__ == "__main__":
    main()
