"""
Synthetic Venn-diagram worlds with a known ground truth.

Items are points in the unit square and attributes are axis-aligned
rectangles; an item has an attribute iff its point lies in the rectangle.
The noisy matrix keeps each true pair with probability ``1 - drop``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GROUND_TRUTH, NOISY, EntityCatalog, ObservationMatrix


@dataclass
class VennWorld:
    points: np.ndarray
    rect_mins: np.ndarray
    rect_maxs: np.ndarray
    truth: ObservationMatrix
    observed: ObservationMatrix

    @property
    def catalog(self) -> EntityCatalog:
        m, n = self.truth.shape
        return EntityCatalog([f"item{i}" for i in range(m)], [f"attr{a}" for a in range(n)])


def venn_world(m: int = 1000, n: int = 20, drop: float = 0.3, side=(0.2, 0.7), seed: int = 0) -> VennWorld:
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(m, 2))
    sides = rng.uniform(side[0], side[1], size=(n, 2))
    lo = rng.uniform(0.0, 1.0 - sides)
    hi = lo + sides
    member = np.all((points[:, None, :] >= lo[None]) & (points[:, None, :] <= hi[None]), axis=-1)
    keep = member & (rng.uniform(size=member.shape) >= drop)
    return VennWorld(points, lo, hi, ObservationMatrix.from_dense(member, GROUND_TRUTH),
                     ObservationMatrix.from_dense(keep, NOISY))
