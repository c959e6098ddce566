"""Build the small MNIST IDX fixture used by the desk-scale training tests.

Source: the 5000-sample MNIST extract shipped inside the ``mlxtend`` wheel
(``mlxtend/data/data/mnist_5k.csv.gz``, 500 images per digit, one unrolled
28x28 image plus label per row).  Pass either that CSV or the wheel::

    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl
"""
import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from opau.datasets import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_source(path: Path) -> np.ndarray:
    if path.suffix == ".whl":
        raw = zipfile.ZipFile(path).read(MEMBER)
    else:
        raw = path.read_bytes()
    return np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",", dtype=np.int64)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("source", type=Path)
    ap.add_argument("--out", type=Path, default=Path("tests/data"))
    ap.add_argument("--train", type=int, default=1024)
    ap.add_argument("--test", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    table = read_source(args.source)
    order = np.random.default_rng(args.seed).permutation(table.shape[0])
    images = table[:, :-1].reshape(-1, 28, 28)
    labels = table[:, -1]
    splits = {"train": order[: args.train], "test": order[args.train : args.train + args.test]}
    args.out.mkdir(parents=True, exist_ok=True)
    for name, idx in splits.items():
        write_idx(args.out / f"mnist-{name}-images-idx3-ubyte.gz", images[idx])
        write_idx(args.out / f"mnist-{name}-labels-idx1-ubyte.gz", labels[idx])
        print(name, len(idx), np.bincount(labels[idx], minlength=10))


if __name__ == "__main__":
    main()
