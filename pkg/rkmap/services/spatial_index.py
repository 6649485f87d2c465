"""Uniform grid bucketing of 2-D points for fixed-radius neighbor queries."""

import math
from collections import defaultdict
from typing import Dict, Iterator, Tuple

import numpy as np

from rkmap.errors import InvalidArgumentError

BucketKey = Tuple[int, int]


class GridIndex:
  """Bucket points into square cells of edge ``bucket_size``.

  Queries with a radius up to ``bucket_size`` only inspect the 3x3 block of buckets around the
  query point; larger radii widen the block accordingly.
  """

  def __init__(self, xy: np.ndarray, bucket_size: float):
    if not bucket_size > 0 or not math.isfinite(bucket_size):
      raise InvalidArgumentError(f'bucket size must be finite and > 0, got {bucket_size}')
    self.xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    self.bucket_size = float(bucket_size)
    self.inv_size = 1.0 / self.bucket_size

    buckets: Dict[BucketKey, list] = defaultdict(list)
    for index, key in enumerate(self._keys(self.xy)):
      buckets[key].append(index)
    self.buckets: Dict[BucketKey, np.ndarray] = {
      key: np.array(members, dtype=np.int64) for key, members in buckets.items()
    }

  def __len__(self) -> int:
    return len(self.xy)

  def _keys(self, xy: np.ndarray) -> Iterator[BucketKey]:
    cells = np.floor(xy * self.inv_size).astype(np.int64)
    return (tuple(c) for c in cells.tolist())

  def _ring(self, radius: float) -> int:
    return max(1, int(math.ceil(radius * self.inv_size)))

  def candidates(self, key: BucketKey, ring: int = 1) -> np.ndarray:
    """Indices stored in the (2 ring + 1)^2 buckets around ``key``, ascending."""
    found = [
      self.buckets[(key[0] + dx, key[1] + dy)]
      for dx in range(-ring, ring + 1)
      for dy in range(-ring, ring + 1)
      if (key[0] + dx, key[1] + dy) in self.buckets
    ]
    if not found:
      return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(found))

  def within(self, x: float, y: float, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """Indices and distances of points within ``radius`` of (x, y), sorted by (distance, index)."""
    key = next(self._keys(np.array([[x, y]])))
    idx = self.candidates(key, self._ring(radius))
    if idx.size == 0:
      return idx, np.empty(0)
    d = np.hypot(self.xy[idx, 0] - x, self.xy[idx, 1] - y)
    keep = d <= radius
    idx, d = idx[keep], d[keep]
    order = np.lexsort((idx, d))
    return idx[order], d[order]

  def nearest(self, x: float, y: float, k: int, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """Up to ``k`` closest points within ``radius``; ties broken by index."""
    idx, d = self.within(x, y, radius)
    return idx[:k], d[:k]

  def nearest_distance(self, points: np.ndarray, max_distance: float) -> np.ndarray:
    """Distance from each query point to its closest indexed point, inf beyond ``max_distance``."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    result = np.full(len(points), np.inf)
    if len(self) == 0 or len(points) == 0:
      return result

    ring = self._ring(max_distance)
    groups: Dict[BucketKey, list] = defaultdict(list)
    for query, key in enumerate(self._keys(points)):
      groups[key].append(query)

    for key, queries in groups.items():
      idx = self.candidates(key, ring)
      if idx.size == 0:
        continue
      q = points[queries]
      dx = q[:, 0, None] - self.xy[None, idx, 0]
      dy = q[:, 1, None] - self.xy[None, idx, 1]
      best = np.hypot(dx, dy).min(axis=1)
      result[queries] = np.where(best <= max_distance, best, np.inf)
    return result
