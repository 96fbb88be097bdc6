"""File outputs: JSON through json-encoder, CSV through pandas, all written atomically"""
import json as std_json
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from json_encoder import json
from json_encoder.json import json_encoder


@json_encoder.register(np.ndarray)
def encode_ndarray(obj):
    """Encoding function for use with json-encoder library"""
    return obj.tolist()


@json_encoder.register(np.integer)
def encode_np_integer(obj):
    """Encoding function for use with json-encoder library"""
    return int(obj)


@json_encoder.register(np.bool_)
def encode_np_bool(obj):
    """Encoding function for use with json-encoder library"""
    return bool(obj)


@json_encoder.register(complex)
def encode_complex(obj):
    """Encoding function for use with json-encoder library"""
    return {"re": obj.real, "im": obj.imag}


@json_encoder.register(Path)
def encode_path(obj):
    """Encoding function for use with json-encoder library"""
    return str(obj)


def _atomic_write(path: str, payload, mode: str) -> None:
    """Write to a temp file next to `path`, then rename over it"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        if "b" in mode:
            with os.fdopen(fd, mode) as f:
                f.write(payload)
        else:
            with os.fdopen(fd, mode, encoding="utf-8", newline="") as f:
                f.write(payload)
        os.replace(tmp_path, path)
    except BaseException:
        os.unlink(tmp_path)
        raise


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats"""
    return json.dumps(obj, indent=4, sort_keys=True, allow_nan=True)


def write_json(obj, path: str) -> None:
    _atomic_write(path, dumps(obj) + "\n", "w")


def read_json(path: str):
    """Plain stdlib decoding: numbers come back as float and int, never Decimal"""
    with open(path, "r", encoding="utf-8") as f:
        return std_json.load(f)


def write_csv(frame: pd.DataFrame, path: str) -> None:
    """CSV with a header row, ',' separators and repr-precision floats"""
    _atomic_write(path, frame.to_csv(index=False, lineterminator="\n"), "w")


def write_binary(data: bytes, path: str) -> None:
    _atomic_write(path, data, "wb")
