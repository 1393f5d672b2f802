"""JSON output shared by the stage writers."""

import json
import math

import numpy as np


def _clean(obj):
    # strict JSON has no NaN or infinity; they become null
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(data):
    """Serialize with sorted keys, one-space indent and NaN as null."""
    return json.dumps(_clean(data), indent=1, sort_keys=True,
                      allow_nan=False) + "\n"
