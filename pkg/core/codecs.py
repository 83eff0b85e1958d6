import gzip
import json
import os
from typing import Any

import numpy as np


class NumpyEncoder(json.JSONEncoder):
    """JSON encoder for NumPy arrays and scalars"""
    def default(self, obj):
        if isinstance(obj, np.ndarray): return obj.tolist()
        if isinstance(obj, np.integer): return int(obj)
        if isinstance(obj, np.floating): return float(obj)
        if isinstance(obj, np.bool_): return bool(obj)
        if hasattr(obj, 'to_dict'): return obj.to_dict()
        return super().default(obj)


def dumps(data: Any, indent: int = None) -> str:
    return json.dumps(data, cls=NumpyEncoder, indent=indent)


def write_json(data: Any, output_path: str) -> int:
    with open(output_path, 'w', encoding='utf-8') as f:
        f.write(dumps(data))
    return os.path.getsize(output_path)


def create_compressed_json(data: Any, output_path: str) -> int:
    """Write gzip-compressed JSON and return the file size"""
    json_str = json.dumps(data, cls=NumpyEncoder, separators=(',', ':'))
    # mtime=0 keeps the bytes identical across runs
    with open(output_path, 'wb') as raw:
        with gzip.GzipFile(filename='', fileobj=raw, mode='wb', compresslevel=9, mtime=0) as f:
            f.write(json_str.encode('utf-8'))
    return os.path.getsize(output_path)


def read_json(path: str) -> Any:
    opener = gzip.open if path.endswith('.gz') else open
    with opener(path, 'rt', encoding='utf-8') as f:
        return json.load(f)
