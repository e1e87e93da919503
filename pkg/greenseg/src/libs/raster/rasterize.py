from collections.abc import Iterable

import numpy as np

try:
    from .models import LabelSet, Polygon, Ring
except (ImportError, ModuleNotFoundError):
    from models import LabelSet, Polygon, Ring


def rasterize(labels: LabelSet | Iterable[Polygon], width: int, height: int) -> np.ndarray:
    """Burn polygons into a uint8 mask.

    A pixel is set when its centre ``(col + 0.5, row + 0.5)`` lies inside a
    polygon under the even-odd rule, so holes stay clear. Polygons are OR-ed.
    """
    polygons = labels.polygons if isinstance(labels, LabelSet) else labels
    mask = np.zeros((height, width), dtype=bool)
    for polygon in polygons:
        mask |= _fill(polygon, width, height)
    return mask.astype(np.uint8)


def _fill(polygon: Polygon, width: int, height: int) -> np.ndarray:
    # crossings[row, k] counts edges crossing the row centre line whose
    # intersection lies right of pixel centres 0..k-1
    crossings = np.zeros((height, width + 1), dtype=np.int32)
    centres = np.arange(height) + 0.5
    for ring in polygon.rings():
        _add_crossings(crossings, ring, centres, width)
    # a pixel is inside when an odd number of crossings lies to its right
    right = np.cumsum(crossings[:, :0:-1], axis=1)[:, ::-1]
    return (right % 2).astype(bool)


def _add_crossings(crossings: np.ndarray, ring: Ring, centres: np.ndarray, width: int) -> None:
    pts = np.asarray(ring, dtype=np.float64)
    if len(pts) < 2:
        return
    if not np.array_equal(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    for (x1, y1), (x2, y2) in zip(pts[:-1], pts[1:]):
        if y1 == y2:
            continue
        lo, hi = min(y1, y2), max(y1, y2)
        rows = np.flatnonzero((centres >= lo) & (centres < hi))
        if rows.size == 0:
            continue
        xs = x1 + (centres[rows] - y1) * (x2 - x1) / (y2 - y1)
        # pixel centre c + 0.5 < xs  <=>  c < ceil(xs - 0.5)
        k = np.clip(np.ceil(xs - 0.5).astype(np.int64), 0, width)
        np.add.at(crossings, (rows, k), 1)
