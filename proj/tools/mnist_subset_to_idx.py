#!/usr/bin/env python3
"""Convert the 5000-image MNIST subset bundled with mlxtend into gzipped IDX files.

    pip download --no-deps -d /tmp/mlx mlxtend
    python3 tools/mnist_subset_to_idx.py /tmp/mlx/mlxtend-*.whl data/

Writes mnist5k-images-idx3-ubyte.gz and mnist5k-labels-idx1-ubyte.gz.
"""
import gzip
import os
import struct
import sys
import zipfile

import numpy as np


def main():
    wheel, out_dir = sys.argv[1], sys.argv[2]
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    table = np.array([line.split(",") for line in raw.strip().split("\n")], dtype=np.uint8)
    pixels, labels = table[:, :-1], table[:, -1]
    count = pixels.shape[0]
    os.makedirs(out_dir, exist_ok=True)
    with gzip.GzipFile(os.path.join(out_dir, "mnist5k-images-idx3-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        f.write(pixels.tobytes())
    with gzip.GzipFile(os.path.join(out_dir, "mnist5k-labels-idx1-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, count))
        f.write(labels.tobytes())


if __name__ == "__main__":
    main()
