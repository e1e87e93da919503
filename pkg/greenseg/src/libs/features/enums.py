from enum import Enum


class MorphOp(str, Enum):
    """Morphological operation with a square structuring element"""

    ERODE = "erode"
    DILATE = "dilate"
    OPEN = "open"
    CLOSE = "close"

    def text(self) -> str:
        match self:
            case MorphOp.ERODE:
                return "Erosion"
            case MorphOp.DILATE:
                return "Dilation"
            case MorphOp.OPEN:
                return "Opening (erosion, then dilation)"
            case MorphOp.CLOSE:
                return "Closing (dilation, then erosion)"


class Channel(str, Enum):
    """Feature channels in stack order"""

    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    NIR = "nir"
    NDVI = "ndvi"
    TEXTURE = "texture"
    SOBEL = "sobel"
