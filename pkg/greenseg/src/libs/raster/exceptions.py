import logging


class RasterError(Exception):
    """Base exception of raster and label handling"""

    def __init__(self, *args: object) -> None:
        logging.debug("Error occurs: %s", self.__class__.__name__)
        super().__init__(*args)

    @classmethod
    def message(cls) -> str:
        return "Raster data error"


class RasterParseError(RasterError):
    """Raster file has a bad magic number or is truncated"""

    def __init__(self, detail: str, offset: int) -> None:
        super().__init__(f"{detail} (byte offset {offset})")
        self.offset = offset

    @classmethod
    def message(cls) -> str:
        return "Unreadable raster file"


class LabelError(RasterError):
    """Label collection contains an invalid feature"""

    @classmethod
    def message(cls) -> str:
        return "Invalid label geometry"


class TilingError(RasterError):
    """Raster cannot be split into tiles of the requested size"""

    @classmethod
    def message(cls) -> str:
        return "Raster too small for tiling"
