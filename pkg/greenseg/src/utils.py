import hashlib
import json
import os
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import PIL.Image

from greenseg.src import config


def resolve_seed(flag: Optional[int], configured: Optional[int]) -> int:
    """Command-line seed, else the run document's, else GREENSEG_SEED."""
    if flag is not None:
        return flag
    if configured is not None:
        return configured
    return config.SEED


def resolve_workers(flag: Optional[int], configured: Optional[int]) -> int:
    workers = next((w for w in (flag, configured) if w is not None), config.WORKERS)
    return max(int(workers), 1)


def write_json(payload: Any, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=4)


def digest(path: Union[str, os.PathLike]) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()


def save_pgm(image: np.ndarray, path: Union[str, os.PathLike]) -> None:
    """Write a probability map in [0, 1] or a {0, 1} mask as an 8-bit PGM."""
    image = np.asarray(image, dtype=np.float64)
    grey = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    PIL.Image.fromarray(grey).save(Path(path), format="PPM")


def load_pgm(path: Union[str, os.PathLike]) -> np.ndarray:
    """8-bit greyscale image as float32 values in [0, 1]."""
    with PIL.Image.open(path) as img:
        grey = np.asarray(img.convert("L"), dtype=np.float32)
    return grey / 255.0
