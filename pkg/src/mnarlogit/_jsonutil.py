import json
import math

import numpy as np


def to_plain(obj):
    """Recursively convert numpy values to builtins; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj):
    return json.dumps(to_plain(obj), indent=2, sort_keys=True, allow_nan=False)
