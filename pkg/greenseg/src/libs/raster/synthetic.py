import logging
import math
from collections import Counter

import numpy as np
import pydantic
from scipy import ndimage

try:
    from .models import (RAW_MAX, Affine, LabelSet, Polygon, Raster,
                         SceneConfig, TileRecord)
    from .rasterize import rasterize
except (ImportError, ModuleNotFoundError):
    from models import (RAW_MAX, Affine, LabelSet, Polygon, Raster,
                        SceneConfig, TileRecord)
    from rasterize import rasterize


class Patch(pydantic.BaseModel):
    """Rectangular greenhouse cutout, every pixel of it positive."""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    pixels: np.ndarray
    """(C, h, w)"""

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[1], self.pixels.shape[2]


def cut_patches(t: TileRecord, min_side: int = 3) -> list[Patch]:
    """Cut out components of the mask that fill their bounding box."""
    labels, _ = ndimage.label(t.mask)
    patches = []
    for idx, box in enumerate(ndimage.find_objects(labels), start=1):
        if box is None:
            continue
        component = labels[box] == idx
        if component.all() and min(component.shape) >= min_side:
            patches.append(Patch(pixels=t.channels[(slice(None), *box)].copy()))
    return patches


def patch_paste(background: TileRecord,
                patches: list[Patch],
                rng: np.random.Generator,
                max_retries: int = 50) -> tuple[TileRecord, int]:
    """Paste patches at random non-overlapping positions.

    Returns:
        tuple[TileRecord, int]: the new tile and the number of patches that
            found no free position within `max_retries` attempts
    """
    channels = background.channels.copy()
    mask = background.mask.copy()
    occupied = np.zeros_like(mask, dtype=bool)
    size_y, size_x = mask.shape
    skipped = 0
    for patch in patches:
        h, w = patch.shape
        if h > size_y or w > size_x:
            skipped += 1
            continue
        for _ in range(max_retries):
            y0 = int(rng.integers(0, size_y - h + 1))
            x0 = int(rng.integers(0, size_x - w + 1))
            if not occupied[y0:y0 + h, x0:x0 + w].any():
                channels[:, y0:y0 + h, x0:x0 + w] = patch.pixels
                mask[y0:y0 + h, x0:x0 + w] = 1
                occupied[y0:y0 + h, x0:x0 + w] = True
                break
        else:
            skipped += 1
    if skipped:
        logging.debug("patch_paste skipped %d of %d patches", skipped, len(patches))
    return background.model_copy(update={"channels": channels, "mask": mask,
                                         "weight_map": None}), skipped


def synthesize_tiles(sources: list[TileRecord],
                     backgrounds: list[TileRecord],
                     count: int,
                     rng: np.random.Generator,
                     patches_per_tile: int = 3) -> list[TileRecord]:
    """Paste greenhouse cutouts of `sources` onto backgrounds drawn at random.

    The k-th tile built on a background window carries `origin.synthetic == k`.
    Nothing is built without cutouts or backgrounds.
    """
    if count <= 0:
        return []
    patches = [p for t in sources for p in cut_patches(t)]
    if not patches or not backgrounds:
        logging.warning("No synthetic tiles: %d greenhouse cutouts, %d background tiles",
                        len(patches), len(backgrounds))
        return []

    variants = Counter()
    tiles = []
    for _ in range(count):
        background = backgrounds[int(rng.integers(len(backgrounds)))]
        chosen = rng.choice(len(patches), size=min(patches_per_tile, len(patches)), replace=False)
        pasted, _ = patch_paste(background, [patches[i] for i in chosen], rng)
        origin = background.origin.model_copy(update={"synthetic": variants[background.origin]})
        variants[background.origin] += 1
        tiles.append(pasted.model_copy(update={"origin": origin}))
    logging.info("Synthesized %d tiles from %d cutouts on %d backgrounds",
                 len(tiles), len(patches), len(backgrounds))
    return tiles


def generate_scene(config: SceneConfig) -> tuple[Raster, LabelSet]:
    """Paint a 4-band scene with greenhouses, haze and shadows.

    Greenhouses are bright rectangles whose footprint is the rasterized
    label polygon, so labels and painted pixels agree exactly.
    """
    rng = np.random.default_rng(config.seed)
    h, w = config.height, config.width
    image = _background(config, rng)

    polygons: list[Polygon] = []
    occupied = np.zeros((h, w), dtype=bool)
    target = int(rng.integers(config.count_range[0], config.count_range[1] + 1))
    for _ in range(target * 200):
        if len(polygons) == target:
            break
        polygon = _greenhouse(config, rng)
        footprint = rasterize([polygon], w, h).astype(bool)
        if not footprint.any():
            continue
        grown = ndimage.binary_dilation(footprint, iterations=config.gap)
        if (grown & occupied).any():
            continue
        occupied |= footprint
        polygons.append(polygon)
        _paint_greenhouse(image, footprint, config, rng)
    if len(polygons) < target:
        logging.warning("Scene %d holds %d of %d greenhouses", config.seed, len(polygons), target)

    if rng.random() < config.haze_probability:
        image += _haze(config, rng)[None]
    if rng.random() < config.shadow_probability:
        image *= _shadow(config, rng)[None]

    image += rng.normal(0.0, config.noise, image.shape)
    data = np.clip(np.rint(image), 0, RAW_MAX).astype(np.uint16)
    transform = Affine(a=config.resolution, c=500_000.0 + 1000.0 * config.seed,
                       e=-config.resolution, f=4_400_000.0)
    return Raster(data=data, transform=transform), LabelSet(polygons=polygons)


def _background(config: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    palette = np.asarray(config.background_palette, dtype=np.float64)
    field = ndimage.gaussian_filter(rng.standard_normal((config.height, config.width)),
                                    sigma=min(config.height, config.width) / 12)
    # quantile bins give every palette class a share of the scene
    edges = np.quantile(field, np.linspace(0, 1, len(palette) + 1)[1:-1])
    classes = np.digitize(field, edges)
    image = palette[classes].transpose(2, 0, 1).copy()
    image *= 1.0 + 0.08 * ndimage.gaussian_filter(rng.standard_normal(image.shape[1:]), 3)[None]
    return image


def _greenhouse(config: SceneConfig, rng: np.random.Generator) -> Polygon:
    lo, hi = config.size_range
    gw, gh = rng.integers(lo, hi + 1, size=2).astype(float)
    angle = math.radians(rng.uniform(*config.angle_range))
    radius = 0.5 * math.hypot(gw, gh)
    cx = rng.uniform(radius + 1, config.width - radius - 1)
    cy = rng.uniform(radius + 1, config.height - radius - 1)
    if angle == 0.0:
        cx, cy = round(cx - gw / 2) + gw / 2, round(cy - gh / 2) + gh / 2
    corners = np.array([[-gw, -gh], [gw, -gh], [gw, gh], [-gw, gh]]) / 2.0
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    pts = corners @ rot.T + [cx, cy]
    ring = [(float(x), float(y)) for x, y in pts]
    return Polygon(exterior=ring + ring[:1])


def _paint_greenhouse(image: np.ndarray,
                      footprint: np.ndarray,
                      config: SceneConfig,
                      rng: np.random.Generator) -> None:
    color = np.asarray(config.greenhouse_color, dtype=np.float64) * rng.uniform(0.9, 1.1)
    rows = np.arange(image.shape[1])[:, None]
    stripes = 1.0 + 0.04 * np.sin(rows * 2.0 * np.pi / rng.uniform(3.0, 6.0))
    for band in range(image.shape[0]):
        image[band][footprint] = (color[band] * np.broadcast_to(stripes, footprint.shape))[footprint]


def _haze(config: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:config.height, 0:config.width]
    cy, cx = rng.uniform(0, config.height), rng.uniform(0, config.width)
    spread = rng.uniform(0.2, 0.5) * max(config.height, config.width)
    return config.haze_strength * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * spread ** 2))


def _shadow(config: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    cx, cy = rng.uniform(0, config.width), rng.uniform(0, config.height)
    radius = rng.uniform(0.1, 0.3) * min(config.width, config.height)
    angles = np.sort(rng.uniform(0, 2 * np.pi, 5))
    ring = [(float(cx + radius * np.cos(a)), float(cy + radius * np.sin(a))) for a in angles]
    region = rasterize([Polygon(exterior=ring + ring[:1])], config.width, config.height)
    return 1.0 - config.shadow_strength * region
