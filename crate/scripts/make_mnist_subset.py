#!/usr/bin/env python3
"""Build a small MNIST subset in gzipped IDX format.

Source: the 5,000-digit MNIST sample bundled inside the `mlxtend` wheel
(500 images per class). The wheel is fetched with `pip download` and read
directly, so mlxtend itself is never installed or imported.

Output (default data/mnist-5k/):
    train-images-idx3-ubyte.gz  4000 images, 400 per class
    train-labels-idx1-ubyte.gz
    t10k-images-idx3-ubyte.gz   1000 images, 100 per class
    t10k-labels-idx1-ubyte.gz

The split is stratified and shuffled with a fixed seed.
"""
import argparse
import glob
import gzip
import io
import os
import struct
import subprocess
import tempfile
import zipfile

import numpy as np


def write_idx(path, images, labels_path, labels):
    n, rows, cols = images.shape
    # mtime=0 keeps the gzip bytes reproducible
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist-5k"))
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20200823)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            ["pip", "download", "--no-deps", "--quiet", "-d", tmp, "mlxtend==0.24.0"],
            check=True,
        )
        wheel = glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]
        blob = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")

    table = np.loadtxt(io.StringIO(gzip.decompress(blob).decode()), delimiter=",", dtype=np.int64)
    pixels, labels = table[:, :-1], table[:, -1]
    assert pixels.shape == (5000, 784) and pixels.max() <= 255

    rng = np.random.default_rng(args.seed)
    train_idx, test_idx = [], []
    for c in range(10):
        idx = rng.permutation(np.flatnonzero(labels == c))
        test_idx.extend(idx[: args.test_per_class])
        train_idx.extend(idx[args.test_per_class:])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    os.makedirs(args.out, exist_ok=True)
    for prefix, idx in (("train", train_idx), ("t10k", test_idx)):
        write_idx(
            os.path.join(args.out, f"{prefix}-images-idx3-ubyte.gz"),
            pixels[idx].reshape(-1, 28, 28),
            os.path.join(args.out, f"{prefix}-labels-idx1-ubyte.gz"),
            labels[idx],
        )
        print(prefix, len(idx))


if __name__ == "__main__":
    main()
