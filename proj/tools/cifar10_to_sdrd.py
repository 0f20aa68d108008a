#!/usr/bin/env python3
"""Convert the CIFAR-10 python batches into a single SDRD dataset file.

usage: cifar10_to_sdrd.py <cifar-10-batches-py dir> <out.sdrd>

Training and test batches are pooled; load_file_sequence does its own
per-class split. Pixels are scaled to [0, 1] and stored HWC.
"""
import pickle
import struct
import sys
from pathlib import Path

import numpy as np

VERSION = 1


def load(path):
    with open(path, "rb") as f:
        batch = pickle.load(f, encoding="bytes")
    x = batch[b"data"].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return x.astype(np.float32) / 255.0, np.asarray(batch[b"labels"], dtype=np.int32)


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    names = [f"data_batch_{i}" for i in range(1, 6)] + ["test_batch"]
    parts = [load(src / n) for n in names]
    x = np.concatenate([p[0] for p in parts])
    y = np.concatenate([p[1] for p in parts])
    n, h, w, c = x.shape
    with open(out, "wb") as f:
        f.write(b"SDRD")
        f.write(struct.pack("<6I", VERSION, n, h, w, c, 10))
        f.write(x.astype("<f4").tobytes())
        f.write(y.astype("<i4").tobytes())
    print(f"wrote {n} samples ({h}x{w}x{c}) to {out}")


if __name__ == "__main__":
    main()
