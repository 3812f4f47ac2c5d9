#!/usr/bin/env python3
"""Build gzipped IDX files from the 5 000-image MNIST sample bundled with mlxtend.

The sample ships 500 images per digit. This script makes a stratified split
(400 train / 100 test per digit), shuffles each split with a fixed seed and
writes the four standard IDX containers (gzip-compressed) into data/mnist-5k/.

Usage:
    pip download --no-deps mlxtend -d /tmp/mlxtend
    python3 scripts/make_mnist_subset.py /tmp/mlxtend/mlxtend-*.whl
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

SEED = 20240531
TRAIN_PER_CLASS = 400


def load(wheel):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(raw.decode().splitlines(), delimiter=",")
    return table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)


def write_idx(path, images, labels):
    n = len(labels)
    img = struct.pack(">IIII", 0x00000803, n, 28, 28) + images.tobytes()
    lab = struct.pack(">II", 0x00000801, n) + labels.tobytes()
    with gzip.GzipFile(path[0], "wb", mtime=0) as f:
        f.write(img)
    with gzip.GzipFile(path[1], "wb", mtime=0) as f:
        f.write(lab)


def main():
    images, labels = load(sys.argv[1])
    rng = np.random.default_rng(SEED)
    train_idx, test_idx = [], []
    for c in range(10):
        idx = rng.permutation(np.flatnonzero(labels == c))
        train_idx.extend(idx[:TRAIN_PER_CLASS])
        test_idx.extend(idx[TRAIN_PER_CLASS:])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)
    out = Path(__file__).resolve().parent.parent / "data" / "mnist-5k"
    out.mkdir(parents=True, exist_ok=True)
    write_idx((out / "train-images-idx3-ubyte.gz", out / "train-labels-idx1-ubyte.gz"),
              images[train_idx], labels[train_idx])
    write_idx((out / "t10k-images-idx3-ubyte.gz", out / "t10k-labels-idx1-ubyte.gz"),
              images[test_idx], labels[test_idx])
    print("train", len(train_idx), "test", len(test_idx))


if __name__ == "__main__":
    main()
