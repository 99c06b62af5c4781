"""Binary container shared by operator caches and evolution checkpoints.

Layout: one UTF-8 JSON header line terminated by ``\\n``, then the raw
little-endian binary64 arrays concatenated in the order of ``names``::

    {"names": [...], "shapes": [[...], ...], "dtype": "f64-le",
     "basis": {"n_modes": N, "n_quad": Q}, "meta": {...}}

``meta`` is optional free-form JSON. Files are bit-identical across platforms.
"""
import json

import numpy as np

DTYPE = "f64-le"


def write_container(path, arrays, basis, meta=None):
    names = list(arrays)
    data = [np.ascontiguousarray(arrays[k], dtype="<f8") for k in names]
    header = {
        "names": names,
        "shapes": [list(a.shape) for a in data],
        "dtype": DTYPE,
        "basis": {"n_modes": int(basis[0]), "n_quad": int(basis[1])},
    }
    if meta:
        header["meta"] = meta
    line = json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n"
    with open(path, "wb") as fh:
        fh.write(line.encode("utf-8"))
        for a in data:
            fh.write(a.tobytes(order="C"))


def read_container(path):
    """Return ``(arrays, header)``; arrays keep the stored order."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("dtype") != DTYPE:
            raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
        arrays = {}
        for name, shape in zip(header["names"], header["shapes"]):
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"truncated container: array {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
        if fh.read(1):
            raise ValueError("trailing bytes after last array")
    return arrays, header
