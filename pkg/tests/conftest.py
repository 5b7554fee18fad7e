import gzip
import os
import struct
from pathlib import Path

import numpy as np
import pytest


def idx_image_bytes(images_u8: np.ndarray) -> bytes:
    """Pack an N x rows x cols uint8 array into IDX image format."""
    n, rows, cols = images_u8.shape
    return struct.pack(">IIII", 2051, n, rows, cols) + images_u8.tobytes()


def idx_label_bytes(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", 2049, len(labels)) + labels.tobytes()


def write_idx(path, payload: bytes, compress=False):
    path = Path(path)
    if compress:
        with gzip.open(path, "wb") as fh:
            fh.write(payload)
    else:
        path.write_bytes(payload)
    return path


@pytest.fixture(scope="session")
def digits_data():
    """8x8 sklearn digits as (images in [0,1] of shape N x 64, labels)."""
    from sklearn.datasets import load_digits

    ds = load_digits()
    images = (ds.data / 16.0).astype(np.float64)
    return images, ds.target.astype(np.int64)


def mnist_dir():
    """Directory holding the standard IDX files, or None if unavailable."""
    candidates = []
    env = os.environ.get("SBVAE_MNIST_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "mnist")
    names = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
    for cand in candidates:
        if all(
            (cand / n).exists() or (cand / (n + ".gz")).exists() for n in names
        ):
            return cand
    return None


def mnist_path(directory, name):
    p = directory / name
    return p if p.exists() else directory / (name + ".gz")
