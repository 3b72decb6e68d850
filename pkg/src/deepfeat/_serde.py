"""Exact JSON-safe encoding for numpy arrays.

Arrays are stored as base64 of the raw buffer plus an explicit dtype
string (with byte order) and shape, so a round trip is bit-identical.
"""

from __future__ import annotations

import base64

import numpy as np


def encode_array(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr)
    return {
        "shape": list(a.shape),
        "dtype": a.dtype.str,
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def decode_array(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    arr = np.frombuffer(raw, dtype=np.dtype(obj["dtype"]))
    return arr.reshape(obj["shape"]).copy()
