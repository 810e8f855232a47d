"""
Raster types and frame-level operations: ingestion, dehaze, RGB band-pass,
grayscale, crop/paste and nearest-neighbour rotation.

Coordinates are (x, y) = (column, row) with y pointing down. Positive angles
rotate image content counter-clockwise as it is displayed.
"""
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np
from numpy.typing import NDArray
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

logger = logging.getLogger(__name__)

GrayImage = NDArray[np.uint8]
BinaryMask = NDArray[np.bool_]


@dataclass(frozen=True)
class Frame:
    """Timestamped RGB raster; pixels is an (height, width, 3) uint8 array."""

    pixels: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError(f'Frame pixels must be (h, w, 3) uint8, got {px.shape} {px.dtype}')
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise ValueError('Frame must have positive width and height')
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f'Frame timestamp must be finite and >= 0, got {self.timestamp}')

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_pixels(self, pixels: np.ndarray) -> 'Frame':
        return replace(self, pixels=pixels)


@dataclass(frozen=True)
class ColorBandFilter:
    """
    Per-channel intensity windows. Membership is strict at both ends, so a
    channel value v passes iff lower < v < upper (the thresholds of Code 1).
    """

    red: tuple[int, int]
    green: tuple[int, int]
    blue: tuple[int, int]

    def __post_init__(self):
        for name, (lo, hi) in zip(('red', 'green', 'blue'), self.bands()):
            if not (0 <= lo < hi <= 255):
                raise ValueError(f'Invalid {name} band ({lo}, {hi}): need 0 <= lower < upper <= 255')

    def bands(self) -> tuple[tuple[int, int], ...]:
        return (self.red, self.green, self.blue)

    @classmethod
    def parse(cls, text: str) -> 'ColorBandFilter':
        """Parse 'rlo,rhi,glo,ghi,blo,bhi'."""
        try:
            values = [int(v) for v in text.split(',')]
        except ValueError as e:
            raise ValueError(f'Invalid color band {text!r}: {e}') from e
        if len(values) != 6:
            raise ValueError(f'Invalid color band {text!r}: expected 6 integers')
        return cls((values[0], values[1]), (values[2], values[3]), (values[4], values[5]))

    def __str__(self) -> str:
        return ','.join(str(v) for band in self.bands() for v in band)


class Rect(NamedTuple):
    x: int
    y: int
    w: int
    h: int

    @classmethod
    def parse(cls, text: str) -> 'Rect':
        try:
            x, y, w, h = (int(v) for v in text.split(','))
        except ValueError as e:
            raise ValueError(f'Invalid rect {text!r}: expected x,y,w,h') from e
        return cls(x, y, w, h)

    def __str__(self) -> str:
        return f'{self.x},{self.y},{self.w},{self.h}'


def _read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert('RGB'), dtype=np.uint8).copy()
    except UnidentifiedImageError as e:
        raise ValueError(f'Unsupported image format: {path}') from e
    except OSError as e:
        raise ValueError(f'Failed to decode image {path}: {e}') from e


def read_manifest(manifest: Union[str, Path]) -> list[Path]:
    """
    Read a frame manifest: UTF-8 text, one image path per line, '#' comments
    and blank lines ignored. Relative paths resolve against the manifest's
    directory.
    """
    manifest = Path(manifest)
    if not manifest.is_file():
        raise FileNotFoundError(f'Manifest not found: {manifest}')
    paths = []
    for line in manifest.read_text(encoding='utf-8').splitlines():
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        path = Path(line)
        paths.append(path if path.is_absolute() else manifest.parent / path)
    if not paths:
        raise ValueError('empty manifest')
    return paths


def load_frames(manifest: Union[str, Path], fps: float) -> list[Frame]:
    """
    Load every frame listed in the manifest, in playback order; frame i gets
    timestamp i / fps. PPM (P6) and PNG are supported.
    """
    if not fps > 0:
        raise ValueError(f'fps must be > 0, got {fps}')
    paths = read_manifest(manifest)
    frames = []
    for i, path in enumerate(paths):
        if not path.is_file():
            raise FileNotFoundError(f'Frame file not found: {path}')
        frames.append(Frame(_read_image(path), i / fps))
    logger.info('Loaded %d frames from %s at %.3f fps', len(frames), manifest, fps)
    return frames


def save_frame(frame: Frame, path: Union[str, Path]) -> None:
    """Write a frame as binary PPM (.ppm) or PNG (.png), chosen by suffix."""
    path = Path(path)
    fmt = 'PNG' if path.suffix.lower() == '.png' else 'PPM'
    Image.fromarray(frame.pixels).save(path, format=fmt)


def dehaze(frame: Frame, clip_lo: float = 1.0, clip_hi: float = 99.0) -> Frame:
    """
    Percentile-clipped per-channel linear stretch: the clip_lo percentile maps
    to 0, clip_hi to 255, values are clamped. A channel whose clip percentiles
    coincide is left untouched.
    """
    if not (0 <= clip_lo < clip_hi <= 100):
        raise ValueError(f'Invalid dehaze clip ({clip_lo}, {clip_hi})')
    out = frame.pixels.copy()
    for c in range(3):
        channel = frame.pixels[:, :, c].astype(np.float64)
        lo, hi = np.percentile(channel, [clip_lo, clip_hi])
        if hi <= lo:
            continue
        stretched = np.floor((channel - lo) * 255.0 / (hi - lo) + 0.5)
        out[:, :, c] = np.clip(stretched, 0, 255).astype(np.uint8)
    return frame.with_pixels(out)


def rgb_bandpass(frame: Frame, band: ColorBandFilter) -> BinaryMask:
    mask = np.ones((frame.height, frame.width), dtype=bool)
    for c, (lo, hi) in enumerate(band.bands()):
        channel = frame.pixels[:, :, c]
        mask &= (channel > lo) & (channel < hi)
    return mask


def to_gray(frame: Frame) -> GrayImage:
    """Rec.601 luma, rounded half up."""
    px = frame.pixels.astype(np.float64)
    luma = 0.299 * px[:, :, 0] + 0.587 * px[:, :, 1] + 0.114 * px[:, :, 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def _raster(img):
    return img.pixels if isinstance(img, Frame) else img


def crop(img, rect: Rect):
    """Crop a Frame or a 2-D raster; output pixel (i, j) is source (x + i, y + j)."""
    x, y, w, h = rect
    raster = _raster(img)
    height, width = raster.shape[:2]
    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > width or y + h > height:
        raise ValueError(f'rect out of bounds: {rect} for a {width}x{height} image')
    out = raster[y:y + h, x:x + w].copy()
    if isinstance(img, Frame):
        return img.with_pixels(out)
    return out


def paste(base, patch, x: int, y: int):
    """Copy patch into a copy of base with its top-left corner at (x, y)."""
    raster = _raster(base).copy()
    src = _raster(patch)
    h, w = src.shape[:2]
    if x < 0 or y < 0 or x + w > raster.shape[1] or y + h > raster.shape[0]:
        raise ValueError(f'patch at ({x}, {y}) of size {w}x{h} does not fit')
    raster[y:y + h, x:x + w] = src
    if isinstance(base, Frame):
        return base.with_pixels(raster)
    return raster


def rotation(angle: float) -> tuple[float, float]:
    """(cos, sin) of an angle in degrees, snapped so right angles are exact."""
    theta = math.radians(angle)
    return round(math.cos(theta), 12), round(math.sin(theta), 12)


def _rotate_raster(raster: np.ndarray, angle: float, order: int = 0) -> np.ndarray:
    # Inverse map in (row, col) order: source = M @ (out - c) + c
    cos_a, sin_a = rotation(angle)
    matrix = np.array([[cos_a, sin_a], [-sin_a, cos_a]])
    center = (np.array(raster.shape[:2], dtype=np.float64) - 1) / 2
    offset = center - matrix @ center
    return ndimage.affine_transform(raster, matrix, offset=offset, order=order, mode='constant', cval=0)


def rotate_mask(mask: BinaryMask, angle: float, sigma: float = 0.0) -> BinaryMask:
    """
    Nearest-neighbour inverse-mapped rotation about the mask centre, same size.
    With sigma > 0 the mask is Gaussian-smoothed first, rotated bilinearly and
    thresholded at one half; straight boundaries then stay digital lines.
    """
    if angle % 360 == 0:
        return mask.copy()
    if sigma > 0:
        soft = ndimage.gaussian_filter(mask.astype(np.float64), sigma, mode='constant')
        return _rotate_raster(soft, angle, order=1) >= 0.5
    return _rotate_raster(mask.astype(np.uint8), angle).astype(bool)


def rotate_frame(frame: Frame, angle: float) -> Frame:
    """Rotate frame content about its centre; uncovered pixels become black."""
    if angle % 360 == 0:
        return frame
    channels = [_rotate_raster(frame.pixels[:, :, c], angle) for c in range(3)]
    return frame.with_pixels(np.stack(channels, axis=2).astype(np.uint8))
