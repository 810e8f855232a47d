import math
from collections import deque

import numpy as np
import pytest
from scipy.spatial import cKDTree

from keyvision.binops import (
    Polygon,
    canny,
    connected_components,
    convex_hull,
    distance_transform,
    format_distance_map,
    remove_small,
    stamp_disk,
    stamp_rect,
    subtract,
)

SEEDS = range(100)


def _random_mask(seed, shape=(64, 64), density=0.45):
    return np.random.default_rng(seed).random(shape) < density


def _flood_fill_components(mask, connectivity):
    """Reference labelling: sets of (x, y) per component."""
    if connectivity == 8:
        steps = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy]
    else:
        steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    h, w = mask.shape
    seen = np.zeros_like(mask)
    found = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            seen[y, x] = True
            queue, pixels = deque([(x, y)]), set()
            while queue:
                cx, cy = queue.popleft()
                pixels.add((cx, cy))
                for dx, dy in steps:
                    nx, ny = cx + dx, cy + dy
                    if 0 <= nx < w and 0 <= ny < h and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((nx, ny))
            found.append(frozenset(pixels))
    return found


@pytest.mark.parametrize('connectivity', [4, 8])
def test_components_match_flood_fill(connectivity):
    for seed in SEEDS:
        mask = _random_mask(seed)
        got = connected_components(mask, connectivity)
        expected = _flood_fill_components(mask, connectivity)
        assert {frozenset(map(tuple, c.pixels.tolist())) for c in got} == set(expected)
        areas = [c.area for c in got]
        assert areas == sorted(areas, reverse=True)
        assert [c.label for c in got] == list(range(1, len(got) + 1))


def test_components_ordering_and_bbox():
    mask = np.zeros((10, 10), dtype=bool)
    mask[1, 6:8] = True       # area 2, top-left (6, 1)
    mask[5, 0:2] = True       # area 2, top-left (0, 5)
    mask[7:10, 7:10] = True   # area 9
    comps = connected_components(mask)
    assert [c.area for c in comps] == [9, 2, 2]
    assert comps[0].bbox == (7, 7, 9, 9)
    assert comps[1].top_left == (6, 1)
    assert comps[2].top == 5
    assert comps[0].centroid == (8.0, 8.0)


def test_components_empty_and_connectivity_difference():
    assert connected_components(np.zeros((4, 4), dtype=bool)) == []
    diagonal = np.eye(4, dtype=bool)
    assert len(connected_components(diagonal, 8)) == 1
    assert len(connected_components(diagonal, 4)) == 4
    with pytest.raises(ValueError):
        connected_components(diagonal, 6)


def test_remove_small():
    mask = np.zeros((8, 8), dtype=bool)
    mask[0, 0] = True
    mask[4:7, 4:7] = True
    cleaned = remove_small(mask, 5)
    assert not cleaned[0, 0]
    assert cleaned[4:7, 4:7].all()
    assert np.array_equal(remove_small(mask, 1), mask)
    assert not remove_small(mask, 10).any()


def test_remove_small_keeps_exactly_large_components():
    for seed in range(20):
        mask = _random_mask(seed, density=0.3)
        cleaned = remove_small(mask, 4)
        kept = {frozenset(map(tuple, c.pixels.tolist())) for c in connected_components(cleaned)}
        expected = {c for c in _flood_fill_components(mask, 8) if len(c) >= 4}
        assert kept == expected


def test_distance_transform_matches_brute_force():
    for seed in SEEDS:
        mask = _random_mask(seed, density=0.7)
        if mask.all():
            continue
        background = np.argwhere(~mask)
        foreground = np.argwhere(mask)
        dist, _ = cKDTree(background).query(foreground)
        dmap = distance_transform(mask)
        assert np.allclose(dmap[mask], dist, atol=1e-6)
        assert np.all(dmap[~mask] == 0)


def test_distance_transform_single_pixel_and_full_mask():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 2] = True
    assert distance_transform(mask)[2, 2] == 1.0
    assert np.all(distance_transform(np.ones((3, 7), dtype=bool)) == 7)


def test_format_distance_map():
    assert format_distance_map(np.array([[0.0, 1.5], [math.sqrt(2), 0.0]])) == '0.000 1.500\n1.414 0.000\n'


def test_canny_vertical_step_gives_single_column():
    gray = np.zeros((20, 20), dtype=np.uint8)
    gray[:, 10:] = 255
    edges = canny(gray)
    cols = np.unique(np.nonzero(edges)[1])
    assert len(cols) == 1 and cols[0] in (9, 10)
    assert edges[:, cols[0]].all()


def test_canny_flat_image_has_no_edges():
    assert not canny(np.full((16, 16), 128, dtype=np.uint8)).any()


def test_canny_is_symmetric_under_half_turn():
    gray = np.random.default_rng(7).integers(0, 256, size=(40, 40)).astype(np.uint8)
    edges = canny(gray, sigma=1.5)
    flipped = canny(gray[::-1, ::-1].copy(), sigma=1.5)
    assert np.mean(edges == flipped[::-1, ::-1]) > 0.99


def test_canny_rejects_bad_thresholds():
    gray = np.zeros((5, 5), dtype=np.uint8)
    with pytest.raises(ValueError):
        canny(gray, low=200, high=100)
    with pytest.raises(ValueError):
        canny(gray, sigma=0)


def _gift_wrap(points):
    """Reference hull as a vertex set, collinear boundary points excluded."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return set(pts)
    start = pts[0]
    hull, current = [], start
    while True:
        hull.append(current)
        candidate = pts[0] if pts[0] != current else pts[1]
        for p in pts:
            if p == current:
                continue
            cross = ((candidate[0] - current[0]) * (p[1] - current[1])
                     - (candidate[1] - current[1]) * (p[0] - current[0]))
            farther = (math.dist(current, p) > math.dist(current, candidate))
            if cross < 0 or (cross == 0 and farther):
                candidate = p
        current = candidate
        if current == start:
            break
    return set(hull)


def test_convex_hull_matches_gift_wrapping():
    for seed in SEEDS:
        pts = np.random.default_rng(seed).integers(0, 64, size=(30, 2))
        points = [tuple(map(float, p)) for p in pts]
        hull = convex_hull(points)
        assert set(map(tuple, hull.vertices.tolist())) == _gift_wrap(points)


def test_convex_hull_is_counter_clockwise_on_screen():
    hull = convex_hull([(0, 0), (10, 0), (10, 10), (0, 10), (5, 5)])
    v = hull.vertices
    shoelace = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    # with y pointing down a negative shoelace sum is counter-clockwise as displayed
    assert shoelace < 0
    assert hull.perimeter == pytest.approx(40.0)


def test_convex_hull_drops_edge_points_and_duplicates():
    square = [(0, 0), (5, 0), (10, 0), (10, 5), (10, 10), (5, 10), (0, 10), (0, 5), (10, 10), (4, 6)]
    hull = convex_hull(square)
    assert hull.vertices.tolist() == [[0, 0], [0, 10], [10, 10], [10, 0]]
    assert hull.perimeter == pytest.approx(40.0)


def test_convex_hull_collinear_floats():
    line = convex_hull([(1.5, 7.0), (1.5, 2.0), (1.5, 4.25), (1.5, 2.0)])
    assert line.vertices.tolist() == [[1.5, 2.0], [1.5, 7.0]]
    assert line.perimeter == pytest.approx(10.0)


def test_convex_hull_degenerate_inputs():
    assert convex_hull([(3, 4)]).perimeter == 0.0
    line = convex_hull([(0, 0), (1, 1), (2, 2), (3, 3)])
    assert len(line.vertices) == 2
    assert line.perimeter == pytest.approx(2 * math.hypot(3, 3))
    with pytest.raises(ValueError):
        convex_hull([])
    assert Polygon(np.zeros((0, 2))).perimeter == 0.0


def test_subtract_matches_bitwise_oracle():
    for seed in SEEDS:
        a, b = _random_mask(seed), _random_mask(seed + 1000)
        expected = np.array([[x and not y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)])
        assert np.array_equal(subtract(a, b), expected)
    with pytest.raises(ValueError, match='dimension mismatch'):
        subtract(np.zeros((2, 2), bool), np.zeros((3, 2), bool))


def test_stamp_disk():
    disk = stamp_disk(9, 9, (4, 4), 2)
    assert disk.sum() == 13
    assert disk[4, 6] and not disk[6, 6]
    assert stamp_disk(5, 5, (2, 2), 0.5).sum() == 1


def test_stamp_rect_axis_aligned_and_quarter_turn():
    rect = stamp_rect(20, 20, (10, 10), 4, 8)
    ys, xs = np.nonzero(rect)
    assert (xs.min(), xs.max(), ys.min(), ys.max()) == (8, 11, 6, 13)
    turned = stamp_rect(20, 20, (10, 10), 4, 8, 90)
    assert turned.sum() == rect.sum()
    ys, xs = np.nonzero(turned)
    assert xs.max() - xs.min() == 7 and ys.max() - ys.min() == 3
