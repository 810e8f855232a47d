"""
Learn key ranges from a scripted calibration recording: every key is pressed
(possibly several times) in a known interval after an idle prefix.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

from .binops import connected_components
from .imagecore import BinaryMask
from .keypress import KeyRange, KeyRangeTable, capture_reference, diff_mask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScriptedPress:
    key: str
    start: float
    end: float

    def covers(self, ts: float) -> bool:
        return self.start <= ts < self.end

    @property
    def chord(self) -> frozenset:
        return frozenset(self.key.split('+'))


@dataclass(frozen=True)
class CalibrationScript:
    """
    Idle prefix end plus press intervals. Intervals are half-open, strictly
    increasing and non-overlapping; a key may be scripted more than once.
    """

    idle_until: float
    presses: tuple[ScriptedPress, ...]

    def __post_init__(self):
        previous_end = None
        for press in self.presses:
            if not press.key:
                raise ValueError('scripted press needs a key name')
            if press.end <= press.start:
                raise ValueError(f'{press.key}: interval [{press.start}, {press.end}) is empty')
            if previous_end is not None and press.start < previous_end:
                raise ValueError(f'{press.key}: interval starts before the previous one ends')
            previous_end = press.end
        if self.presses and self.presses[0].start <= self.idle_until:
            raise ValueError(f'idle_until {self.idle_until} must precede the first press')

    @property
    def keys(self) -> list[str]:
        return list(dict.fromkeys(p.key for p in self.presses))

    def active_at(self, ts: float) -> frozenset:
        return frozenset().union(*(p.chord for p in self.presses if p.covers(ts)))


def parse_script(text: str, source: str = '<script>') -> CalibrationScript:
    """
    Parse the script format: first non-comment line 'idle_until,<t>', then
    'key,start,end' lines. Chords may be written with '+' (C3+E3+G3).
    """
    lines = [ln.split('#', 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f'{source}: empty script')
    head = [v.strip() for v in lines[0].split(',')]
    if len(head) != 2 or head[0] != 'idle_until':
        raise ValueError(f'{source}: first line must be idle_until,<seconds>')
    try:
        idle_until = float(head[1])
        presses = []
        for ln in lines[1:]:
            parts = [v.strip() for v in ln.split(',')]
            if len(parts) != 3:
                raise ValueError(f'expected key,start,end in {ln!r}')
            presses.append(ScriptedPress(parts[0], float(parts[1]), float(parts[2])))
    except ValueError as e:
        raise ValueError(f'{source}: {e}') from e
    return CalibrationScript(idle_until, tuple(presses))


def load_script(path: Union[str, Path]) -> CalibrationScript:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f'Script not found: {path}')
    return parse_script(path.read_text(encoding='utf-8'), str(path))


def format_script(script: CalibrationScript) -> str:
    lines = [f'idle_until,{script.idle_until:g}']
    lines += [f'{p.key},{p.start:g},{p.end:g}' for p in script.presses]
    return '\n'.join(lines) + '\n'


def learn_ranges(
    timed_masks: Sequence[tuple[float, BinaryMask]],
    script: CalibrationScript,
    margin: int = 5,
    min_area: int = 5,
    connectivity: int = 8,
) -> KeyRangeTable:
    """
    For every scripted interval, take the top row of the largest diff
    component in each frame; a key's range spans its observed tops widened by
    margin on both sides. Observations of a key are pooled over all its
    intervals.
    """
    if margin < 0:
        raise ValueError(f'margin must be >= 0, got {margin}')
    reference = capture_reference(timed_masks, script.idle_until)

    observed: dict[str, list[int]] = defaultdict(list)
    for press in script.presses:
        for ts, mask in timed_masks:
            if not press.covers(ts):
                continue
            components = connected_components(diff_mask(mask, reference, min_area, connectivity), connectivity)
            if components:
                observed[press.key].append(components[0].top)

    ranges = []
    for key in script.keys:
        tops = observed.get(key)
        if not tops:
            raise ValueError(f'key {key} never observed')
        ranges.append(KeyRange(key, min(tops) - margin, max(tops) + margin))
        logger.debug('Key %s: %d observations, tops %d..%d', key, len(tops), min(tops), max(tops))
    table = KeyRangeTable(ranges)
    logger.info('Learned %d key ranges', len(table))
    return table
