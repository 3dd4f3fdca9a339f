import numpy as np
import pytest

from contourcodec.contour import ABSOLUTE, OPPOSITE, Contour, to_relative
from contourcodec.image_io import ColorImage


def random_contour(rng: np.random.Generator, length: int, start=(200, 200)) -> Contour:
    """Valid random chain (no 180-degree turns), free to wander off any image."""
    first = ABSOLUTE[rng.integers(0, 4)]
    dirs = [first]
    for _ in range(length - 1):
        options = [d for d in ABSOLUTE if d != OPPOSITE[dirs[-1]]]
        dirs.append(options[rng.integers(0, len(options))])
    return to_relative(start, dirs)


def textured_color(rng: np.random.Generator, height: int, width: int) -> ColorImage:
    """Smooth random texture with enough horizontal detail for the proxy."""
    raw = rng.integers(0, 256, size=(height, width, 3)).astype(float)
    smooth = (raw + np.roll(raw, 1, axis=1) + np.roll(raw, 1, axis=0)) / 3.0
    return ColorImage(np.clip(smooth, 0, 255).astype(np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def contour_from_boundary_columns(bcols, start_row: int = 0) -> Contour:
    """Open top-to-bottom contour crossing row r at column bcols[r]."""
    dirs = []
    for r, b in enumerate(bcols):
        if r > 0 and b != bcols[r - 1]:
            d = "W" if b < bcols[r - 1] else "E"
            dirs.extend([d] * abs(b - bcols[r - 1]))
        dirs.append("S")
    return to_relative((start_row, bcols[0]), dirs)
