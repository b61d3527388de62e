"""Named-tensor checkpoint files.

One JSON document per checkpoint: tensor name -> shape + row-major float64
values, plus optional named scalars. Values are stored as float hex strings,
so a save/load cycle is bit-exact and repeated saves of equal content are
byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_TAG = "fraudgraph-named-tensors-v1"


def save_named_tensors(path, named: dict[str, np.ndarray], scalars: dict | None = None) -> None:
    doc = {
        "format": FORMAT_TAG,
        "scalars": {k: float(v).hex() for k, v in (scalars or {}).items()},
        "tensors": {
            name: {
                "shape": list(arr.shape),
                "values": [float(x).hex() for x in np.asarray(arr, dtype=np.float64).ravel()],
            }
            for name, arr in named.items()
        },
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")), encoding="utf-8"
    )


def load_named_tensors(path) -> tuple[dict[str, np.ndarray], dict[str, float]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != FORMAT_TAG:
        raise ValueError(f"unrecognized checkpoint format in {path}")
    tensors = {
        name: np.array(
            [float.fromhex(v) for v in entry["values"]], dtype=np.float64
        ).reshape(entry["shape"])
        for name, entry in doc["tensors"].items()
    }
    scalars = {k: float.fromhex(v) for k, v in doc["scalars"].items()}
    return tensors, scalars
