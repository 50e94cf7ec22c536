"""Pure numpy support scan, used when the compiled extension is missing."""

import numpy as np


def max_support_distance(a: np.ndarray, dist: np.ndarray, tau: float) -> float:
    m = a.shape[-1]
    mask = (np.abs(a) > tau).reshape(-1, m, m).any(axis=0)
    if not mask.any():
        return 0.0
    return float(dist[mask].max())
