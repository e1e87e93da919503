import json
import logging
import os
from typing import Any, Iterable, Optional, Union

import numpy as np

try:
    from .exceptions import LabelError
    from .models import Affine, LabelSet, Polygon, Ring
except (ImportError, ModuleNotFoundError):
    from exceptions import LabelError
    from models import Affine, LabelSet, Polygon, Ring

CRS_MEMBER = "greenseg:crs"
"""foreign member naming the coordinate system of a collection"""


def read_labels(path: Union[str, os.PathLike], transform: Optional[Affine] = None) -> LabelSet:
    """Load Polygon and MultiPolygon features as pixel-space polygons.

    World coordinates are mapped through the inverse of `transform` unless
    the collection declares itself in pixel space.

    Raises:
        LabelError: unclosed ring or ring with fewer than 3 distinct vertices,
            reported with the feature index
    """
    with open(path, "r", encoding="utf-8") as f:
        collection = json.load(f)
    return parse_labels(collection, transform)


def parse_labels(collection: dict[str, Any], transform: Optional[Affine] = None) -> LabelSet:
    if collection.get("type") != "FeatureCollection":
        raise LabelError("labels must be a GeoJSON FeatureCollection")
    crs = collection.get(CRS_MEMBER, "world" if transform is not None else "pixel")
    to_pixel = transform if crs != "pixel" else None

    polygons: list[Polygon] = []
    flagged: list[int] = []
    for idx, feature in enumerate(collection.get("features", [])):
        geometry = feature.get("geometry") or {}
        match geometry.get("type"):
            case "Polygon":
                parts = [geometry["coordinates"]]
            case "MultiPolygon":
                parts = geometry["coordinates"]
            case other:
                raise LabelError(f"feature {idx}: unsupported geometry type {other!r}")
        for rings in parts:
            converted = [_ring(idx, r, to_pixel) for r in rings]
            polygon = Polygon(exterior=converted[0], holes=converted[1:])
            if any(_self_intersects(r) for r in polygon.rings()):
                logging.warning("Feature %d has a self-intersecting ring", idx)
                flagged.append(len(polygons))
            polygons.append(polygon)
    return LabelSet(polygons=polygons, crs=crs, flagged=flagged)


def _ring(idx: int, coords: list, to_pixel: Optional[Affine]) -> Ring:
    pts = np.asarray(coords, dtype=np.float64)[:, :2]
    if len(pts) < 2 or not np.array_equal(pts[0], pts[-1]):
        raise LabelError(f"feature {idx}: ring is not closed")
    if len(np.unique(pts[:-1], axis=0)) < 3:
        raise LabelError(f"feature {idx}: ring has fewer than 3 distinct vertices")
    if to_pixel is not None:
        cols, rows = to_pixel.inverse(pts[:, 0], pts[:, 1])
        pts = np.column_stack([cols, rows])
    return [(float(x), float(y)) for x, y in pts]


def _self_intersects(ring: Ring) -> bool:
    """Proper crossing between non-adjacent edges."""
    pts = np.asarray(ring)
    n = len(pts) - 1
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]):
                return True
    return False


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    return (orient(p1, p2, q1) * orient(p1, p2, q2) < 0
            and orient(q1, q2, p1) * orient(q1, q2, p2) < 0)


def feature_collection(rings: Iterable[Ring],
                       transform: Optional[Affine] = None,
                       properties: Optional[Iterable[dict[str, Any]]] = None) -> dict[str, Any]:
    """Build a FeatureCollection of single-ring polygons.

    Rings are emitted closed and counter-clockwise in the output coordinate
    system, mapped to world coordinates when `transform` is given.
    """
    rings = list(rings)
    properties = list(properties) if properties is not None else [{} for _ in rings]
    features = []
    for ring, props in zip(rings, properties):
        pts = np.asarray(ring, dtype=np.float64)
        if transform is not None:
            pts = np.column_stack(transform.forward(pts[:, 0], pts[:, 1]))
        if not np.array_equal(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[:1]])
        if signed_area(pts) < 0:
            pts = pts[::-1]
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [pts.tolist()]},
            "properties": props,
        })
    return {
        "type": "FeatureCollection",
        CRS_MEMBER: "world" if transform is not None else "pixel",
        "features": features,
    }


def write_labels(labels: LabelSet,
                 path: Union[str, os.PathLike],
                 transform: Optional[Affine] = None) -> None:
    """Write exterior rings of a label set; holes are written as extra rings."""
    features = []
    for polygon in labels.polygons:
        rings = []
        for ring in polygon.rings():
            pts = np.asarray(ring, dtype=np.float64)
            if transform is not None:
                pts = np.column_stack(transform.forward(pts[:, 0], pts[:, 1]))
            if not np.array_equal(pts[0], pts[-1]):
                pts = np.vstack([pts, pts[:1]])
            rings.append(pts.tolist())
        features.append({"type": "Feature",
                         "geometry": {"type": "Polygon", "coordinates": rings},
                         "properties": {}})
    dump({"type": "FeatureCollection",
          CRS_MEMBER: "world" if transform is not None else "pixel",
          "features": features}, path)


def dump(collection: dict[str, Any], path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(collection, f, indent=4)


def signed_area(pts) -> float:
    """Shoelace area, positive for counter-clockwise rings (y axis up)."""
    pts = np.asarray(pts, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))
