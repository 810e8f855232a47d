"""
Pressed-key detection by reference-frame differencing.

A press shows up as a component of the band-passed frame that is absent from
the idle reference; the component's top row is looked up in a table of
per-key row ranges. Events are written one per line as
"Keys pressed: C3; at 24.413 sec".
"""
import csv
import io
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .binops import check_same_shape, connected_components, remove_small, subtract
from .imagecore import (
    BinaryMask,
    ColorBandFilter,
    Frame,
    Rect,
    crop,
    dehaze,
    paste,
    rgb_bandpass,
    rotate_frame,
)

logger = logging.getLogger(__name__)

RED = (255, 0, 0)

# note names within an octave; "Cb" is the black key right of C (written C3b for octave 3)
_OCTAVE = ('C', 'Cb', 'D', 'Db', 'E', 'F', 'Fb', 'G', 'Gb', 'A', 'Ab', 'B')
_NAME_RE = re.compile(r'^([A-G])(\d+)(b?)$')
_EVENT_RE = re.compile(r'^Keys pressed: ((?:[^;\s]+; )+)at (\d+\.\d{3}) sec$')


class DetectionMode(str, Enum):
    VERBATIM = 'verbatim'
    DEDUP = 'dedup'


@dataclass(frozen=True)
class KeyRange:
    key: str
    lo: int
    hi: int

    def __post_init__(self):
        if not self.key:
            raise ValueError('key range needs a non-empty key name')
        if self.lo > self.hi:
            raise ValueError(f'key range {self.key}: lo {self.lo} > hi {self.hi}')

    def __contains__(self, top: int) -> bool:
        return self.lo <= top <= self.hi


class KeyRangeTable:
    """Disjoint key ranges over the component top row, kept sorted by lo."""

    def __init__(self, ranges: Iterable[KeyRange]):
        self.ranges: tuple[KeyRange, ...] = tuple(sorted(ranges, key=lambda r: r.lo))
        for prev, cur in zip(self.ranges, self.ranges[1:]):
            if cur.lo <= prev.hi:
                raise ValueError(f'ranges collide: {prev.key},{cur.key}')
        self._los = np.array([r.lo for r in self.ranges], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.ranges)

    def __iter__(self):
        return iter(self.ranges)

    def __eq__(self, other) -> bool:
        return isinstance(other, KeyRangeTable) and self.ranges == other.ranges

    def __repr__(self) -> str:
        return f'KeyRangeTable({list(self.ranges)!r})'

    def lookup(self, top: int) -> Optional[str]:
        i = int(np.searchsorted(self._los, top, side='right')) - 1
        if i >= 0 and top in self.ranges[i]:
            return self.ranges[i].key
        return None


def load_table(path: Union[str, Path]) -> KeyRangeTable:
    """Read a range table CSV with header key,lo,hi."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f'Range table not found: {path}')
    with path.open(newline='', encoding='utf-8') as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ['key', 'lo', 'hi']:
            raise ValueError(f'{path}: expected header key,lo,hi, got {reader.fieldnames}')
        try:
            ranges = [KeyRange(row['key'].strip(), int(row['lo']), int(row['hi'])) for row in reader]
        except (TypeError, ValueError) as e:
            raise ValueError(f'{path}: bad range row: {e}') from e
    logger.debug('Loaded %d key ranges from %s', len(ranges), path)
    return KeyRangeTable(ranges)


def dump_table(table: KeyRangeTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(['key', 'lo', 'hi'])
    for r in table:
        writer.writerow([r.key, r.lo, r.hi])
    return buf.getvalue()


def key_names(first: str = 'C2', count: int = 61) -> list[str]:
    """Consecutive key names starting at a white key, e.g. C2, C2b, D2, ..."""
    match = _NAME_RE.match(first)
    if not match or match.group(3):
        raise ValueError(f'first key must be a white key like C2, got {first!r}')
    index = _OCTAVE.index(match.group(1)) + 12 * int(match.group(2))
    names = []
    for i in range(index, index + count):
        octave, step = divmod(i, 12)
        note = _OCTAVE[step]
        names.append(f'{note[0]}{octave}{note[1:]}')
    return names


@dataclass(frozen=True)
class KeyPressEvent:
    timestamp: float
    keys: tuple[str, ...]
    component_tops: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f'event timestamp must be >= 0, got {self.timestamp}')


def capture_reference(timed_masks: Sequence[tuple[float, BinaryMask]], idle_until: float) -> BinaryMask:
    """The latest mask whose timestamp is <= idle_until."""
    reference = None
    for ts, mask in timed_masks:
        if ts <= idle_until and (reference is None or ts >= reference[0]):
            reference = (ts, mask)
    if reference is None:
        raise ValueError(f'no idle frame before idle_until={idle_until}')
    logger.info('Captured reference frame at %.3f sec', reference[0])
    return reference[1]


def diff_mask(current: BinaryMask, reference: BinaryMask, min_area: int = 5, connectivity: int = 8) -> BinaryMask:
    return remove_small(subtract(current, reference), min_area, connectivity)


def detect_pressed(
    diff: BinaryMask,
    table: KeyRangeTable,
    ts: float,
    mode: DetectionMode = DetectionMode.VERBATIM,
    connectivity: int = 8,
) -> Optional[KeyPressEvent]:
    """
    Match the top row of every diff component against the range table.
    Verbatim mode keeps repeated key names; dedup keeps the first of each.
    """
    keys, tops = [], []
    for comp in connected_components(diff, connectivity):
        key = table.lookup(comp.top)
        if key is None:
            continue
        if mode == DetectionMode.DEDUP and key in keys:
            continue
        keys.append(key)
        tops.append(comp.top)
    if not keys:
        return None
    return KeyPressEvent(ts, tuple(keys), tuple(tops))


def annotate(frame: Frame, diff: BinaryMask) -> Frame:
    """Copy of the frame with every diff pixel painted red."""
    check_same_shape(frame.pixels[:, :, 0], diff)
    pixels = frame.pixels.copy()
    pixels[diff] = RED
    return frame.with_pixels(pixels)


def format_event(event: KeyPressEvent) -> str:
    if not event.keys:
        raise ValueError('cannot format an event with no keys')
    return 'Keys pressed: ' + ''.join(f'{k}; ' for k in event.keys) + f'at {event.timestamp:.3f} sec'


def parse_event(line: str) -> KeyPressEvent:
    match = _EVENT_RE.match(line.rstrip('\n'))
    if not match:
        raise ValueError(f'not a key event line: {line!r}')
    keys = tuple(k for k in match.group(1).split('; ') if k)
    return KeyPressEvent(float(match.group(2)), keys)


@dataclass(frozen=True)
class EventScore:
    precision: float
    recall: float
    f1: float
    true_positives: int
    detected: int
    expected: int


def score_events(
    events: Sequence[KeyPressEvent],
    truth: Sequence[tuple[float, frozenset]],
    tolerance: float = 1e-6,
) -> EventScore:
    """
    Event-level precision/recall: a detected event is correct when ground truth
    at the same timestamp has exactly the same key set. Idle truth entries
    (empty sets) are not expected events.
    """
    expected = {round(t / tolerance): frozenset(keys) for t, keys in truth if keys}
    hits = sum(1 for e in events if expected.get(round(e.timestamp / tolerance)) == frozenset(e.keys))
    precision = hits / len(events) if events else 1.0
    recall = hits / len(expected) if expected else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EventScore(precision, recall, f1, hits, len(events), len(expected))


@dataclass
class DetectionResult:
    events: list[KeyPressEvent]
    annotated: list[Frame]


def key_mask(
    frame: Frame,
    band: ColorBandFilter,
    focus: Optional[Rect] = None,
    clip: tuple[float, float] = (1.0, 99.0),
    rotation: float = 0.0,
) -> BinaryMask:
    """Rotate, dehaze, crop to the focus band and band-pass one frame."""
    prepared = dehaze(rotate_frame(frame, rotation), *clip)
    if focus is not None:
        prepared = crop(prepared, focus)
    return rgb_bandpass(prepared, band)


def run_detection(
    frames: Sequence[Frame],
    band: ColorBandFilter,
    focus: Optional[Rect],
    idle_until: float,
    table: KeyRangeTable,
    min_area: int = 5,
    mode: DetectionMode = DetectionMode.VERBATIM,
    clip: tuple[float, float] = (1.0, 99.0),
    rotation: float = 0.0,
    connectivity: int = 8,
) -> DetectionResult:
    """
    Full key pipeline over a frame sequence. Component tops are in focus-band
    coordinates; annotated frames are the rotated full frames with the diff
    painted red.
    """
    frames = sorted(frames, key=lambda f: f.timestamp)
    masks = [(f.timestamp, key_mask(f, band, focus, clip, rotation)) for f in frames]
    reference = capture_reference(masks, idle_until)

    events, annotated = [], []
    for frame, (ts, mask) in zip(frames, masks):
        diff = diff_mask(mask, reference, min_area, connectivity)
        event = detect_pressed(diff, table, ts, mode, connectivity)
        if event is not None:
            logger.info(format_event(event))
            events.append(event)
        shown = rotate_frame(frame, rotation)
        if focus is not None:
            full = np.zeros((shown.height, shown.width), dtype=bool)
            diff = paste(full, diff, focus.x, focus.y)
        annotated.append(annotate(shown, diff))
    logger.info('Detected %d key events over %d frames', len(events), len(frames))
    return DetectionResult(events, annotated)
