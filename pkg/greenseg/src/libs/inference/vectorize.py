import logging
import os
from collections import defaultdict
from collections.abc import Iterable, Sequence
from typing import Any, Optional, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from greenseg.src.libs.features import MorphOp, morph
from greenseg.src.libs.metrics import connected_components
from greenseg.src.libs.raster import Affine
from greenseg.src.libs.raster.geojson import dump, feature_collection, signed_area
from greenseg.src.libs.raster.models import Ring

try:
    from .exceptions import OutputError
    from .models import PolygonFeature, ProbabilityMap
except (ImportError, ModuleNotFoundError):
    from exceptions import OutputError
    from models import PolygonFeature, ProbabilityMap

Vertex = tuple[int, int]
Step = tuple[int, int]


def to_mask(probabilities: Union[ProbabilityMap, np.ndarray], threshold: float = 0.5) -> np.ndarray:
    """uint8 mask of pixels with probability >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    if isinstance(probabilities, ProbabilityMap):
        probabilities = probabilities.probabilities
    return (np.asarray(probabilities) >= threshold).astype(np.uint8)


def cleanup(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Morphological opening removing specks and thin bridges."""
    return morph(np.asarray(mask) > 0, MorphOp.OPEN, radius).astype(np.uint8)


def _boundary_steps(component: np.ndarray) -> list[tuple[Vertex, Step]]:
    """Directed unit edges along the pixel sides separating the component from
    its outside, oriented with the component on the right of travel (y down)."""
    padded = np.pad(component, 1)
    sides = (
        (~padded[:-2, 1:-1], (0, 0), (1, 0)),   # top
        (~padded[1:-1, 2:], (1, 0), (0, 1)),    # right
        (~padded[2:, 1:-1], (1, 1), (-1, 0)),   # bottom
        (~padded[1:-1, :-2], (0, 1), (0, -1)),  # left
    )
    steps = []
    for outside, (dx, dy), step in sides:
        rows, cols = np.nonzero(component & outside)
        steps.extend(((int(c) + dx, int(r) + dy), step) for r, c in zip(rows, cols))
    return steps


def _turn(heading: Step, options: list[Step]) -> Step:
    # right, straight, left: hugging the component splits rings at corner contacts
    dx, dy = heading
    for candidate in ((-dy, dx), heading, (dy, -dx)):
        if candidate in options:
            return candidate
    raise RuntimeError(f"boundary walk stuck at heading {heading}")


def _chain(steps: Iterable[tuple[Vertex, Step]]) -> list[list[Vertex]]:
    outgoing: dict[Vertex, list[Step]] = defaultdict(list)
    for vertex, step in steps:
        outgoing[vertex].append(step)

    rings = []
    for start in sorted(outgoing, key=lambda v: (v[1], v[0])):
        while outgoing[start]:
            heading = outgoing[start].pop(0)
            vertex, ring = start, [start]
            while True:
                vertex = (vertex[0] + heading[0], vertex[1] + heading[1])
                if vertex == start:
                    break
                ring.append(vertex)
                heading = _turn(heading, outgoing[vertex])
                outgoing[vertex].remove(heading)
            rings.append(ring)
    return rings


def _merge_collinear(ring: list[Vertex]) -> np.ndarray:
    pts = np.asarray(ring, dtype=np.float64)
    into = pts - np.roll(pts, 1, axis=0)
    out = np.roll(pts, -1, axis=0) - pts
    cross = into[:, 0] * out[:, 1] - into[:, 1] * out[:, 0]
    keep = pts[cross != 0]
    return np.vstack([keep, keep[:1]])


def trace_polygons(mask: np.ndarray, transform: Optional[Affine] = None) -> list[PolygonFeature]:
    """Outline each 4-connected component of a mask.

    Vertices are pixel corners, so filling a traced ring by pixel centres
    reproduces its component. Only the outer ring is kept; holes are dropped.
    """
    labels, count = connected_components(mask)
    features = []
    for k, window in enumerate(ndimage.find_objects(labels), start=1):
        component = labels[window] == k
        rings = [_merge_collinear(r) for r in _chain(_boundary_steps(component))]
        outer = max(rings, key=signed_area)
        outer = outer + (window[1].start, window[0].start)
        features.append(_feature(outer, k, transform))
    logging.debug("Traced %d components", count)
    return features


def min_bounding_rectangle(points: Union[Ring, np.ndarray],
                           component: int = 0,
                           transform: Optional[Affine] = None) -> PolygonFeature:
    """Smallest-area enclosing rectangle of a point set.

    Candidate orientations are the convex hull edges, one of which the
    optimum is known to be flush with. Collinear input yields a zero-width
    rectangle flagged degenerate.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64)[:, :2], axis=0)
    if len(pts) == 0:
        raise ValueError("cannot bound an empty point set")
    try:
        hull = pts[ConvexHull(pts).vertices]
    except (QhullError, ValueError):
        return _degenerate(pts, component, transform)

    edges = np.roll(hull, -1, axis=0) - hull
    u = edges / np.hypot(edges[:, 0], edges[:, 1])[:, None]
    n = np.column_stack([-u[:, 1], u[:, 0]])
    along, across = hull @ u.T, hull @ n.T
    lo_u, hi_u = along.min(axis=0), along.max(axis=0)
    lo_n, hi_n = across.min(axis=0), across.max(axis=0)
    areas = (hi_u - lo_u) * (hi_n - lo_n)
    i = int(np.argmin(areas))

    corners = [a * u[i] + b * n[i] for a, b in
               ((lo_u[i], lo_n[i]), (hi_u[i], lo_n[i]), (hi_u[i], hi_n[i]), (lo_u[i], hi_n[i]))]
    ring = np.vstack([corners, corners[:1]])
    return _feature(ring, component, transform, area=float(areas[i]))


def _degenerate(pts: np.ndarray, component: int, transform: Optional[Affine]) -> PolygonFeature:
    a, b = pts[0], pts[-1]
    ring = np.vstack([a, b, b, a, a])
    return _feature(ring, component, transform, area=0.0, degenerate=True)


def _feature(ring: np.ndarray,
             component: int,
             transform: Optional[Affine],
             area: Optional[float] = None,
             degenerate: bool = False) -> PolygonFeature:
    world = None
    if transform is not None:
        world = [tuple(p) for p in np.column_stack(transform.forward(ring[:, 0], ring[:, 1])).tolist()]
    return PolygonFeature(exterior=[tuple(p) for p in ring.tolist()],
                          world=world,
                          area=signed_area(ring) if area is None else area,
                          component=component,
                          degenerate=degenerate)


def vectorize(probabilities: Union[ProbabilityMap, np.ndarray],
              threshold: float = 0.5,
              cleanup_radius: int = 1,
              rectangles: bool = True,
              transform: Optional[Affine] = None) -> list[PolygonFeature]:
    """Threshold, clean and outline a probability map, optionally replacing
    each outline by its minimum bounding rectangle."""
    mask = cleanup(to_mask(probabilities, threshold), cleanup_radius)
    outlines = trace_polygons(mask, transform)
    if not rectangles:
        return outlines
    return [min_bounding_rectangle(f.exterior[:-1], f.component, transform) for f in outlines]


def properties_of(feature: PolygonFeature, transform: Optional[Affine] = None) -> dict[str, Any]:
    scale = abs(transform.determinant) if transform is not None else 1.0
    return {
        "component": feature.component,
        "area": feature.area * scale,
        "area_px": feature.area,
        "degenerate": feature.degenerate,
    }


def emit_geojson(features: Sequence[PolygonFeature],
                 path: Union[str, os.PathLike],
                 transform: Optional[Affine] = None) -> dict[str, Any]:
    """Write features as a FeatureCollection in world coordinates when a
    transform is given, pixel coordinates otherwise.

    Raises:
        OutputError: the file cannot be written
    """
    collection = feature_collection((f.exterior for f in features), transform,
                                    (properties_of(f, transform) for f in features))
    try:
        dump(collection, path)
    except OSError as e:
        raise OutputError(f"{path}: {e.strerror or e}") from e
    logging.info("Wrote %d polygons to %s", len(features), path)
    return collection
