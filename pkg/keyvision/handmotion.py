"""
Hand geometry: hand splitting, palm centre, palm removal (disk for the
overhead view, tilted rectangle for the side view), finger extraction and
normalisation, edge-line fitting and joint localisation.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .binops import (
    canny,
    connected_components,
    convex_hull,
    distance_transform,
    stamp_disk,
    stamp_rect,
    subtract,
)
from .imagecore import BinaryMask, Frame, rotate_mask

logger = logging.getLogger(__name__)

MAX_JOINTS = 3

# smoothing applied before rotating a finger upright
NORMALIZE_SIGMA = 1.0


@dataclass(frozen=True)
class PalmEstimate:
    center: tuple[float, float]
    max_distance: float
    radius_used: float


@dataclass(frozen=True)
class FingerBlob:
    """Tight crop of one finger; origin is the crop's (x, y) offset in the source mask."""

    mask: BinaryMask
    origin: tuple[int, int]
    orientation: float
    label: int

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class EdgeLine:
    anchor: tuple[float, float]
    direction: tuple[float, float]
    side: str
    rms: float

    def distance(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Perpendicular distance of points (xs, ys) from the line."""
        dx, dy = self.direction
        return np.abs((xs - self.anchor[0]) * dy - (ys - self.anchor[1]) * dx)

    def x_at(self, y: float) -> Optional[float]:
        dx, dy = self.direction
        if dy == 0:
            return None
        return self.anchor[0] + (y - self.anchor[1]) * dx / dy


@dataclass(frozen=True)
class EdgeLinePair:
    left: EdgeLine
    right: EdgeLine


class JointCue(str, Enum):
    DEVIATION = 'deviation'
    INCLINATION = 'inclination'


@dataclass(frozen=True)
class JointEstimate:
    """Joint in normalised-finger coordinates; ordinal 1 is nearest the palm."""

    position: tuple[float, float]
    ordinal: int
    cue: JointCue


def split_hands(mask: BinaryMask, connectivity: int = 8) -> tuple[BinaryMask, BinaryMask]:
    """
    Split a two-hand mask at the widest empty column gap lying between the
    centroids of the two largest components. Left is the hand with the
    smaller centroid x.
    """
    components = connected_components(mask, connectivity)
    if len(components) < 2:
        raise ValueError('cannot split: single cluster')
    first, second = sorted(components[:2], key=lambda c: c.centroid[0])
    lo = math.ceil(first.centroid[0])
    hi = math.floor(second.centroid[0])
    occupied = mask.any(axis=0)

    best_start, best_width = None, 0
    x = lo
    while x <= hi:
        if occupied[x]:
            x += 1
            continue
        start = x
        while x <= hi and not occupied[x]:
            x += 1
        if x - start > best_width:
            best_start, best_width = start, x - start
    if best_start is None:
        raise ValueError('cannot split: hands overlap horizontally')

    split = best_start + best_width // 2
    left = mask.copy()
    left[:, split:] = False
    right = mask.copy()
    right[:, :split] = False
    logger.debug('Split hands at column %d (gap width %d)', split, best_width)
    return left, right


def palm_center(
    mask: BinaryMask,
    dist_floor: float = 2.0,
    border_margin: int = 5,
    fixed_radius: Optional[float] = None,
    radius_cap: float = 1.3,
) -> PalmEstimate:
    """
    The palm centre is the mean position of all pixels attaining the maximum
    of the distance transform, after zeroing distances below dist_floor and
    everything within border_margin of the image edge.

    radius_used is min(fixed_radius, radius_cap * max_distance) when a fixed
    radius is configured, otherwise 1.1 * max_distance.
    """
    if not mask.any():
        raise ValueError('no palm: empty mask')
    dist = distance_transform(mask).copy()
    dist[dist < dist_floor] = 0
    if border_margin > 0:
        dist[:border_margin, :] = 0
        dist[-border_margin:, :] = 0
        dist[:, :border_margin] = 0
        dist[:, -border_margin:] = 0
    peak = float(dist.max())
    if peak <= 0:
        raise ValueError('no palm: distance floor too high')
    ys, xs = np.nonzero(dist == peak)
    center = (float(xs.mean()), float(ys.mean()))
    if fixed_radius is None:
        radius = 1.1 * peak
    else:
        radius = min(fixed_radius, radius_cap * peak)
    logger.debug('Palm centre (%.1f, %.1f), peak distance %.2f, radius %.2f', *center, peak, radius)
    return PalmEstimate(center=center, max_distance=peak, radius_used=radius)


def remove_palm_disk(mask: BinaryMask, palm: PalmEstimate) -> BinaryMask:
    height, width = mask.shape
    return subtract(mask, stamp_disk(width, height, palm.center, palm.radius_used))


def remove_palm_rect(
    mask: BinaryMask,
    center: tuple[float, float],
    rect_w: float,
    rect_h: float,
    angle: float = 32.0,
) -> BinaryMask:
    height, width = mask.shape
    return subtract(mask, stamp_rect(width, height, center, rect_w, rect_h, angle))


def manual_split(
    mask: BinaryMask,
    rect_center: tuple[float, float],
    rect_w: float,
    rect_h: float,
    angle: float = 0.0,
) -> tuple[BinaryMask, BinaryMask]:
    """
    Separate two merged fingers with a cutting rectangle. Returns (kept,
    removed_part); together they partition the input.
    """
    kept = remove_palm_rect(mask, rect_center, rect_w, rect_h, angle)
    return kept, subtract(mask, kept)


def principal_orientation(pixels: np.ndarray) -> float:
    """
    Angle in degrees, in (-90, 90], from image-up to the major axis of the
    pixel cloud, counter-clockwise as displayed.
    """
    pts = pixels.astype(np.float64)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / max(len(pts), 1)
    evals, evecs = np.linalg.eigh(cov)
    ux, uy = evecs[:, int(np.argmax(evals))]
    if uy > 0 or (uy == 0 and ux > 0):
        ux, uy = -ux, -uy
    return math.degrees(math.atan2(-ux, -uy)) + 0.0


def extract_fingers(
    mask: BinaryMask,
    min_area: int = 20,
    max_count: int = 5,
    connectivity: int = 8,
) -> list[FingerBlob]:
    """
    The largest components (at least min_area pixels, at most max_count of
    them) as tight crops. Fingers that touch come out as one blob.
    """
    if max_count < 1:
        raise ValueError(f'max_count must be >= 1, got {max_count}')
    blobs = []
    for comp in connected_components(mask, connectivity):
        if comp.area < min_area or len(blobs) >= max_count:
            break
        x0, y0, x1, y1 = comp.bbox
        crop = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
        crop[comp.pixels[:, 1] - y0, comp.pixels[:, 0] - x0] = True
        blobs.append(FingerBlob(crop, (x0, y0), principal_orientation(comp.pixels), comp.label))
    logger.debug('Extracted %d finger blobs', len(blobs))
    return blobs


def _tight(mask: BinaryMask) -> BinaryMask:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return mask[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]


def normalize_finger(blob: FingerBlob, min_angle: float = 1.0) -> FingerBlob:
    """
    Rotate the finger so its major axis is vertical with the fingertip up, and
    re-crop tight. Blobs already within min_angle of vertical are not rotated.
    The tip is the end whose rows are narrower on average. Rotated blobs are
    smoothed first (see rotate_mask), so their sides stay straight.
    """
    if not blob.mask.any():
        raise ValueError('cannot normalise an empty finger blob')
    mask = blob.mask
    if abs(blob.orientation) >= min_angle:
        h, w = mask.shape
        side = int(math.ceil(math.hypot(h, w))) + 2
        canvas = np.zeros((side, side), dtype=bool)
        y0, x0 = (side - h) // 2, (side - w) // 2
        canvas[y0:y0 + h, x0:x0 + w] = mask
        mask = rotate_mask(canvas, -blob.orientation, sigma=NORMALIZE_SIGMA)
        if not mask.any():
            mask = canvas
    mask = _tight(mask)

    widths = mask.sum(axis=1)
    k = max(1, len(widths) // 3)
    if widths[:k].mean() > widths[-k:].mean():
        mask = mask[::-1, ::-1]
    return FingerBlob(mask.copy(), blob.origin, 0.0, blob.label)


def finger_edges(
    blob: FingerBlob,
    sigma: float = 1.0,
    low: float = 100.0,
    high: float = 200.0,
) -> tuple[BinaryMask, int]:
    """
    Canny edges of a finger crop. The crop is padded first so boundaries on
    the crop border are detected; returns (edges, margin) where edges cover
    the padded canvas and margin is the padding on every side.
    """
    margin = math.ceil(3 * sigma) + 2
    padded = np.pad(blob.mask, margin, mode='constant')
    return canny(padded.astype(np.uint8) * 255, sigma, low, high), margin


def hull_perimeter(edges: BinaryMask) -> float:
    ys, xs = np.nonzero(edges)
    if len(xs) == 0:
        return 0.0
    return convex_hull(np.column_stack((xs, ys))).perimeter


def edge_chains(edges: BinaryMask) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per edge row: (rows, leftmost x, rightmost x)."""
    ys, xs = np.nonzero(edges)
    if len(ys) == 0:
        empty = np.array([], dtype=int)
        return empty, empty, empty
    rows, starts = np.unique(ys, return_index=True)
    return rows, np.minimum.reduceat(xs, starts), np.maximum.reduceat(xs, starts)


def _fit_line(xs: np.ndarray, ys: np.ndarray, side: str) -> EdgeLine:
    pts = np.column_stack((xs, ys)).astype(np.float64)
    mean = pts.mean(axis=0)
    centered = pts - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    dx, dy = vt[0]
    if dy < 0 or (dy == 0 and dx < 0):
        dx, dy = -dx, -dy
    residual = centered @ np.array([-dy, dx])
    rms = float(np.sqrt(np.mean(residual ** 2)))
    return EdgeLine((float(mean[0]), float(mean[1])), (float(dx), float(dy)), side, rms)


def fit_edge_lines(edges: BinaryMask) -> EdgeLinePair:
    """
    Total-least-squares lines through the left chain (leftmost edge pixel of
    each row) and the right chain (rightmost) of a normalised finger's edges.
    """
    rows, left, right = edge_chains(edges)
    if len(rows) < 2:
        raise ValueError('need edge pixels on at least 2 rows to fit edge lines')
    return EdgeLinePair(_fit_line(left, rows, 'left'), _fit_line(right, rows, 'right'))


@dataclass
class _Candidate:
    row: float
    response: float
    cue: JointCue


def _deviation_onset(xs, ys, line: EdgeLine, dev_thresh: float) -> list[_Candidate]:
    # only the first onset along the scan counts
    dev = line.distance(xs.astype(np.float64), ys.astype(np.float64))
    above = dev > dev_thresh
    onsets = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    if len(onsets) == 0:
        return []
    i = onsets[0]
    return [_Candidate(float(ys[i]), float(dev[i] / dev_thresh), JointCue.DEVIATION)]


def _chain_angle(xs: np.ndarray, ys: np.ndarray) -> float:
    yc = ys - ys.mean()
    xc = xs - xs.mean()
    return math.degrees(math.atan(float((yc * xc).sum() / (yc ** 2).sum())))


def _inclination_changes(xs, ys, window: int, slope_thresh: float) -> list[_Candidate]:
    """
    Slope changes between adjacent windows of the chain. A change only counts
    if it holds when the slope is refitted over at least 2 * window rows on
    each side (up to 3 * window), so single-pixel steps left by rasterising a
    straight edge do not register.
    """
    if len(ys) < 4 * window:
        return []
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    yw = sliding_window_view(ys, window)
    xw = sliding_window_view(xs, window)
    yc = yw - yw.mean(axis=1, keepdims=True)
    xc = xw - xw.mean(axis=1, keepdims=True)
    slopes = (yc * xc).sum(axis=1) / (yc ** 2).sum(axis=1)
    angles = np.degrees(np.arctan(slopes))
    change = np.abs(angles[window:] - angles[:-window])

    found = []
    above = change > slope_thresh
    j = 0
    while j < len(above):
        if not above[j]:
            j += 1
            continue
        start = j
        while j < len(above) and above[j]:
            j += 1
        peak = start + int(np.argmax(change[start:j]))
        b = peak + window
        before = slice(max(0, b - 3 * window), b)
        after = slice(b, min(len(ys), b + 3 * window))
        if b - before.start < 2 * window or after.stop - b < 2 * window:
            continue
        held = abs(_chain_angle(xs[after], ys[after]) - _chain_angle(xs[before], ys[before]))
        if held <= slope_thresh:
            continue
        row = (ys[b - 1] + ys[b]) / 2
        found.append(_Candidate(float(row), float(held / slope_thresh), JointCue.INCLINATION))
    return found


def joint_candidates(
    edges: BinaryMask,
    lines: EdgeLinePair,
    dev_thresh: float = 3.0,
    slope_window: int = 7,
    slope_thresh: float = 12.0,
    merge_radius: float = 5.0,
    end_trim: int = 8,
) -> list[JointEstimate]:
    """
    Locate up to three articulations of a normalised finger (tip up).

    Both edge chains are median filtered over slope_window rows and scanned
    from the palm end towards the tip, skipping end_trim rows at either end.
    A deviation candidate starts where a chain first moves more than
    dev_thresh px away from its fitted line; an inclination candidate sits
    where the windowed chain slope changes by more than slope_thresh degrees
    between adjacent windows and the change holds over the longer spans on
    either side. Candidates within merge_radius rows are merged; the
    strongest three are kept and numbered from the palm end.
    """
    if dev_thresh <= 0 or slope_window <= 0 or slope_thresh <= 0:
        raise ValueError('joint thresholds must be positive')
    rows, left, right = edge_chains(edges)
    if len(rows) == 0:
        return []
    keep = (rows >= rows.min() + end_trim) & (rows <= rows.max() - end_trim)
    order = np.argsort(-rows[keep], kind='stable')
    scan_rows = rows[keep][order]

    candidates: list[_Candidate] = []
    for chain, line in ((left[keep][order], lines.left), (right[keep][order], lines.right)):
        chain = ndimage.median_filter(chain, size=slope_window | 1, mode='nearest')
        candidates += _deviation_onset(chain, scan_rows, line, dev_thresh)
        candidates += _inclination_changes(chain, scan_rows, slope_window, slope_thresh)
    if not candidates:
        return []

    candidates.sort(key=lambda c: -c.row)
    groups: list[list[_Candidate]] = [[candidates[0]]]
    for cand in candidates[1:]:
        if groups[-1][-1].row - cand.row <= merge_radius:
            groups[-1].append(cand)
        else:
            groups.append([cand])

    merged = [
        _Candidate(float(np.mean([c.row for c in g])), max(c.response for c in g), g[0].cue)
        for g in groups
    ]
    strongest = sorted(merged, key=lambda c: -c.response)[:MAX_JOINTS]
    strongest.sort(key=lambda c: -c.row)

    joints = []
    for ordinal, cand in enumerate(strongest, start=1):
        i = int(np.argmin(np.abs(rows - cand.row)))
        x = (left[i] + right[i]) / 2
        joints.append(JointEstimate((float(x), cand.row), ordinal, cand.cue))
    return joints


def draw_edge_lines(edges: BinaryMask, lines: EdgeLinePair, step: int = 2) -> Frame:
    """Debug overlay: edges in white, every step-th row of the left/right lines in green/blue."""
    height, width = edges.shape
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    pixels[edges] = (255, 255, 255)
    for line, color in ((lines.left, (0, 255, 0)), (lines.right, (0, 0, 255))):
        for y in range(0, height, step):
            x = line.x_at(y)
            if x is not None and 0 <= round(x) < width:
                pixels[y, int(round(x))] = color
    return Frame(pixels)


@dataclass(frozen=True)
class FingerAnalysis:
    """A normalised finger with its edge measurements; joint positions exclude the edge margin."""

    blob: FingerBlob
    orientation: float
    hull_perimeter: float
    lines: EdgeLinePair
    joints: list[JointEstimate]
    edges: BinaryMask


def analyse_finger(
    blob: FingerBlob,
    sigma: float = 1.0,
    low: float = 100.0,
    high: float = 200.0,
    **joint_params,
) -> FingerAnalysis:
    """normalize_finger, finger_edges, fit_edge_lines and joint_candidates in one go."""
    upright = normalize_finger(blob)
    edges, margin = finger_edges(upright, sigma, low, high)
    lines = fit_edge_lines(edges)
    joints = [
        JointEstimate((j.position[0] - margin, j.position[1] - margin), j.ordinal, j.cue)
        for j in joint_candidates(edges, lines, **joint_params)
    ]
    return FingerAnalysis(upright, blob.orientation, hull_perimeter(edges), lines, joints, edges)
