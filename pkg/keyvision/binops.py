"""
Binary-image primitives shared by the hand and key pipelines: connected
components, small-component removal, exact Euclidean distance transform,
Canny edges, convex hull and mask algebra.
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage
from scipy.spatial import ConvexHull

from .imagecore import BinaryMask, GrayImage, rotation

logger = logging.getLogger(__name__)

DistanceMap = NDArray[np.float64]


@dataclass(frozen=True)
class Component:
    """
    One connected set of foreground pixels. bbox is (min_x, min_y, max_x, max_y),
    inclusive; pixels is an (area, 2) int array of (x, y).
    """

    label: int
    area: int
    bbox: tuple[int, int, int, int]
    pixels: np.ndarray

    @property
    def top_left(self) -> tuple[int, int]:
        return self.bbox[0], self.bbox[1]

    @property
    def top(self) -> int:
        """Bounding-box minimum row, the key-matching coordinate."""
        return self.bbox[1]

    @property
    def centroid(self) -> tuple[float, float]:
        mean = self.pixels.mean(axis=0)
        return float(mean[0]), float(mean[1])

    def to_mask(self, shape: tuple[int, int]) -> BinaryMask:
        mask = np.zeros(shape, dtype=bool)
        mask[self.pixels[:, 1], self.pixels[:, 0]] = True
        return mask


@dataclass(frozen=True)
class Polygon:
    """Counter-clockwise vertex list as an (n, 2) array of (x, y)."""

    vertices: np.ndarray

    @property
    def perimeter(self) -> float:
        if len(self.vertices) < 2:
            return 0.0
        edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.hypot(edges[:, 0], edges[:, 1]).sum())


def _structure(connectivity: int) -> np.ndarray:
    if connectivity not in (4, 8):
        raise ValueError(f'connectivity must be 4 or 8, got {connectivity}')
    return ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f'dimension mismatch: {a.shape[::-1]} vs {b.shape[::-1]}')


def label_mask(mask: BinaryMask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    labels, count = ndimage.label(mask, structure=_structure(connectivity))
    return labels, count


def connected_components(mask: BinaryMask, connectivity: int = 8) -> list[Component]:
    """
    Maximal connected foreground sets, labelled 1..n by decreasing area; equal
    areas are ordered by top-left corner in row-major order.
    """
    labels, count = label_mask(mask, connectivity)
    if count == 0:
        return []
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs]
    order = np.argsort(ids, kind='stable')
    ys, xs, ids = ys[order], xs[order], ids[order]
    starts = np.searchsorted(ids, np.arange(1, count + 1))
    ends = np.append(starts[1:], len(ids))

    found = []
    for start, end in zip(starts, ends):
        px = np.column_stack((xs[start:end], ys[start:end]))
        bbox = (int(px[:, 0].min()), int(px[:, 1].min()), int(px[:, 0].max()), int(px[:, 1].max()))
        found.append((px, bbox))
    found.sort(key=lambda item: (-len(item[0]), item[1][1], item[1][0]))
    return [
        Component(label=i, area=len(px), bbox=bbox, pixels=px)
        for i, (px, bbox) in enumerate(found, start=1)
    ]


def remove_small(mask: BinaryMask, min_area: int, connectivity: int = 8) -> BinaryMask:
    """Clear every component with fewer than min_area pixels."""
    if min_area < 0:
        raise ValueError(f'min_area must be >= 0, got {min_area}')
    if min_area <= 1:
        return mask.copy()
    labels, count = label_mask(mask, connectivity)
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    keep = areas >= min_area
    keep[0] = False
    return keep[labels]


def distance_transform(mask: BinaryMask) -> DistanceMap:
    """
    Exact Euclidean distance from each foreground pixel to the nearest
    background pixel (0 on background). A mask with no background at all gets
    max(width, height) everywhere instead of infinity.
    """
    if mask.all():
        return np.full(mask.shape, float(max(mask.shape)))
    return ndimage.distance_transform_edt(mask)


def format_distance_map(dmap: DistanceMap) -> str:
    return '\n'.join(' '.join(f'{v:.3f}' for v in row) for row in dmap) + '\n'


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return kernel / kernel.sum()


# NMS neighbour offsets (dx, dy) per gradient direction bin: 0, 45, 90, 135 degrees
_NMS_OFFSETS = ((1, 0), (1, 1), (0, 1), (-1, 1))


def canny(gray: GrayImage, sigma: float = 1.0, low: float = 100.0, high: float = 200.0) -> BinaryMask:
    """
    Canny edges: Gaussian smoothing truncated at ceil(3 sigma), Sobel gradients,
    non-maximum suppression over four direction bins and 8-connected
    double-threshold hysteresis.
    """
    if not sigma > 0:
        raise ValueError(f'sigma must be > 0, got {sigma}')
    if not (0 <= low < high):
        raise ValueError(f'need 0 <= low < high, got low={low} high={high}')

    kernel = _gaussian_kernel(sigma)
    smoothed = ndimage.correlate1d(gray.astype(np.float64), kernel, axis=0, mode='nearest')
    smoothed = ndimage.correlate1d(smoothed, kernel, axis=1, mode='nearest')
    gx = ndimage.sobel(smoothed, axis=1, mode='nearest')
    gy = ndimage.sobel(smoothed, axis=0, mode='nearest')
    magnitude = np.hypot(gx, gy)

    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    bins = (np.floor((angle + 22.5) / 45.0).astype(int)) % 4

    height, width = magnitude.shape
    padded = np.pad(magnitude, 1, mode='constant')
    keep = np.zeros_like(magnitude, dtype=bool)
    for b, (dx, dy) in enumerate(_NMS_OFFSETS):
        ahead = padded[1 + dy:1 + dy + height, 1 + dx:1 + dx + width]
        behind = padded[1 - dy:1 - dy + height, 1 - dx:1 - dx + width]
        # ties on a plateau keep the pixel ahead of the gradient only
        local_max = (magnitude >= behind) & (magnitude > ahead)
        keep |= (bins == b) & local_max

    weak = keep & (magnitude >= low)
    strong = weak & (magnitude >= high)
    labels, count = label_mask(weak, 8)
    if count == 0:
        return weak
    has_strong = np.zeros(count + 1, dtype=bool)
    has_strong[np.unique(labels[strong])] = True
    has_strong[0] = False
    return has_strong[labels]


def convex_hull(points: Sequence[Sequence[float]]) -> Polygon:
    """
    Convex hull via Qhull, counter-clockwise as displayed and starting at the
    smallest (x, y) vertex; points lying on a hull edge are excluded. One
    distinct point gives a one-vertex hull and collinear input gives the two
    extremes (perimeter twice their distance).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError('convex_hull needs at least one point')
    unique = np.unique(pts, axis=0)
    if len(unique) <= 2:
        return Polygon(unique)
    if np.linalg.matrix_rank(unique - unique[0]) < 2:
        return Polygon(unique[[0, -1]])
    # Qhull orders 2-D vertices counter-clockwise with y up, clockwise on screen
    ring = ConvexHull(unique).vertices[::-1]
    return Polygon(unique[np.roll(ring, -int(np.argmin(ring)))])


def subtract(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """a AND NOT b."""
    check_same_shape(a, b)
    return a & ~b


def stamp_disk(width: int, height: int, center: tuple[float, float], radius: float) -> BinaryMask:
    if radius < 0:
        raise ValueError(f'radius must be >= 0, got {radius}')
    cx, cy = center
    ys, xs = np.mgrid[0:height, 0:width]
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2


def stamp_rect(
    width: int,
    height: int,
    center: tuple[float, float],
    rect_w: float,
    rect_h: float,
    angle: float = 0.0,
) -> BinaryMask:
    """
    Filled rect_w x rect_h rectangle about center, rotated by angle (same
    convention as rotate_mask). A pixel is inside when its inverse-rotated
    offset u, v satisfies -rect_w/2 <= u < rect_w/2 and -rect_h/2 <= v < rect_h/2.
    """
    if rect_w <= 0 or rect_h <= 0:
        raise ValueError(f'rectangle size must be positive, got {rect_w}x{rect_h}')
    cx, cy = center
    cos_a, sin_a = rotation(angle)
    ys, xs = np.mgrid[0:height, 0:width]
    ox, oy = xs - cx, ys - cy
    u = cos_a * ox - sin_a * oy
    v = sin_a * ox + cos_a * oy
    return (u >= -rect_w / 2) & (u < rect_w / 2) & (v >= -rect_h / 2) & (v < rect_h / 2)
