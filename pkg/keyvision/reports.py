"""
Text artifacts written by the management commands.
"""
import logging
from pathlib import Path
from typing import Iterable, Union

from .handmotion import FingerAnalysis
from .keypress import KeyPressEvent, format_event

logger = logging.getLogger(__name__)

JOINTS_HEADER = '# frame_ts hand finger_label joint_ordinal x y cue'
FINGERS_HEADER = '# frame_ts hand finger_label area hull_perimeter orientation'


def write_lines(path: Union[str, Path], lines: Iterable[str]) -> Path:
    """Write newline-terminated UTF-8 lines, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = ''.join(f'{line}\n' for line in lines)
    path.write_text(text, encoding='utf-8')
    logger.debug('Wrote %s', path)
    return path


def event_log(events: Iterable[KeyPressEvent]) -> list[str]:
    return [format_event(e) for e in sorted(events, key=lambda e: e.timestamp)]


def finger_row(ts: float, hand: str, finger: FingerAnalysis) -> str:
    return (
        f'{ts:.3f} {hand} {finger.blob.label} {finger.blob.area} '
        f'{finger.hull_perimeter:.3f} {finger.orientation:.2f}'
    )


def joint_rows(ts: float, hand: str, finger: FingerAnalysis) -> list[str]:
    return [
        f'{ts:.3f} {hand} {finger.blob.label} {j.ordinal} {j.position[0]:.1f} {j.position[1]:.1f} {j.cue.value}'
        for j in finger.joints
    ]


def skipped_row(ts: float, reason: str) -> str:
    return f'# skipped {ts:.3f}: {reason}'
