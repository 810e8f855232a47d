"""
Turn key-press event streams into timed notes and a plain-text score.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .keypress import KeyPressEvent

logger = logging.getLogger(__name__)

_MERGE_EPS = 1e-9
_TIE_EPS = 1e-12


class NoteValue(Enum):
    """Note values with their length in beats (quarter note = one beat)."""

    WHOLE = 4.0
    HALF = 2.0
    QUARTER = 1.0
    EIGHTH = 0.5
    SIXTEENTH = 0.25

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> 'NoteValue':
        try:
            return cls[label.upper()]
        except KeyError as e:
            raise ValueError(f'unknown note value {label!r}') from e


@dataclass(frozen=True)
class TimedNote:
    key: str
    onset: float
    duration: float


@dataclass(frozen=True)
class NoteEvent:
    key: str
    onset: float
    duration: float
    value: NoteValue

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f'note duration must be > 0, got {self.duration}')
        if self.onset < 0:
            raise ValueError(f'note onset must be >= 0, got {self.onset}')


def events_to_notes(
    events: Iterable[KeyPressEvent],
    frame_period: float,
    gap_tolerance: int = 3,
) -> list[TimedNote]:
    """
    Merge per-key detections into notes. Consecutive detections of a key at
    most (gap_tolerance + 1) frame periods apart belong to one note; its
    duration runs from the first detection to one frame past the last.
    Notes are ordered by onset, then by first appearance.
    """
    if frame_period <= 0:
        raise ValueError(f'frame_period must be > 0, got {frame_period}')
    if gap_tolerance < 0:
        raise ValueError(f'gap_tolerance must be >= 0, got {gap_tolerance}')
    limit = (gap_tolerance + 1) * frame_period + _MERGE_EPS

    open_runs: dict[str, list] = {}
    finished = []
    seq = 0
    for event in events:
        ts = event.timestamp
        for key in dict.fromkeys(event.keys):
            run = open_runs.get(key)
            if run is not None and ts - run[1] <= limit:
                run[1] = ts
                continue
            if run is not None:
                finished.append((key, run))
            open_runs[key] = [ts, ts, seq]
            seq += 1
    finished.extend(open_runs.items())
    finished.sort(key=lambda item: (item[1][0], item[1][2]))

    notes = [
        TimedNote(key, round(first, 6), round(last - first + frame_period, 6))
        for key, (first, last, _) in finished
    ]
    logger.debug('Merged detections into %d notes', len(notes))
    return notes


def classify_duration(duration: float, bpm: float) -> NoteValue:
    """
    Nearest note value in log2 distance of duration / beat; exact ties go to
    the longer value and ratios outside the range clamp to whole/sixteenth.
    """
    if duration <= 0 or bpm <= 0:
        raise ValueError(f'duration and bpm must be > 0, got {duration}, {bpm}')
    ratio = math.log2(duration / (60.0 / bpm))
    best, best_distance = None, math.inf
    for value in NoteValue:
        distance = abs(ratio - math.log2(value.value))
        if distance < best_distance - _TIE_EPS:
            best, best_distance = value, distance
    return best


def to_note_events(notes: Iterable[TimedNote], bpm: float) -> list[NoteEvent]:
    return [NoteEvent(n.key, n.onset, n.duration, classify_duration(n.duration, bpm)) for n in notes]


def emit_score(notes: Sequence[NoteEvent], bpm: float, source: str = '-') -> str:
    lines = [f'# bpm={bpm:g} source={source}']
    lines += [f'{n.onset:.3f} {n.key} {n.value.label} {n.duration:.3f}' for n in notes]
    return '\n'.join(lines) + '\n'


def parse_score(text: str) -> list[NoteEvent]:
    notes = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f'score line {number}: expected "onset key value duration", got {line!r}')
        try:
            notes.append(NoteEvent(parts[1], float(parts[0]), float(parts[3]), NoteValue.from_label(parts[2])))
        except ValueError as e:
            raise ValueError(f'score line {number}: {e}') from e
    return notes
