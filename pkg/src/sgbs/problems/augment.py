from __future__ import annotations

import numpy as np

from .cvrp import CvrpInstance
from .tsp import TspInstance


def dihedral(points: np.ndarray) -> list[np.ndarray]:
    """The 8 symmetries of the unit square; element 0 is the identity."""
    x, y = points[:, 0], points[:, 1]
    pairs = [
        (x, y),
        (y, x),
        (1 - x, y),
        (x, 1 - y),
        (1 - x, 1 - y),
        (y, 1 - x),
        (1 - y, x),
        (1 - y, 1 - x),
    ]
    return [np.stack(p, axis=1) for p in pairs]


def augment_x8(instance) -> list:
    if isinstance(instance, TspInstance):
        return [TspInstance(c) for c in dihedral(instance.coords)]
    if isinstance(instance, CvrpInstance):
        pts = np.vstack([instance.depot[None, :], instance.coords])
        return [
            CvrpInstance(p[0], p[1:], instance.demands, instance.capacity) for p in dihedral(pts)
        ]
    raise TypeError(f"x8 augmentation is defined for routing instances only, not {type(instance).__name__}")
