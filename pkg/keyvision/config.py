"""
Run configuration shared by the management commands.

Defaults come from settings.PIANOVISION; a run-config file (dotenv syntax,
upper-case field names) overrides them and command-line flags override both.
"""
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional, Union

from django.conf import settings
from dotenv import dotenv_values

from .imagecore import ColorBandFilter, Rect
from .keypress import DetectionMode

logger = logging.getLogger(__name__)


def _num(value: float) -> str:
    return format(value, '.12g')


def _float_pair(text: str) -> tuple[float, float]:
    parts = [float(v) for v in text.split(',')]
    if len(parts) != 2:
        raise ValueError(f'expected two comma-separated numbers, got {text!r}')
    return parts[0], parts[1]


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    return lambda text: parse(text) if text.strip() else None


# value kind -> (parse from text, format to text)
_CODECS: dict[str, tuple[Callable[[str], Any], Callable[[Any], str]]] = {
    'float': (float, _num),
    'int': (int, str),
    'band': (ColorBandFilter.parse, str),
    'rect': (_optional(Rect.parse), lambda r: '' if r is None else str(r)),
    'pair': (_float_pair, lambda p: f'{_num(p[0])},{_num(p[1])}'),
    'optional_float': (_optional(float), lambda v: '' if v is None else _num(v)),
    'path': (Path, str),
    'mode': (DetectionMode, lambda m: m.value),
}


@dataclass(frozen=True)
class RunConfig:
    fps: float
    hand_band: ColorBandFilter
    key_band: ColorBandFilter
    focus: Optional[Rect]
    frame_rotation: float
    dehaze_clip: tuple[float, float]
    idle_until: float
    min_area_overhead: int
    min_area_side: int
    min_area_diff: int
    connectivity: int
    dist_floor: float
    border_margin: int
    palm_radius: Optional[float]
    palm_radius_cap: float
    palm_rect: tuple[float, float]
    palm_rect_angle: float
    finger_min_area: int
    max_fingers: int
    canny_sigma: float
    canny_low: float
    canny_high: float
    dev_thresh: float
    slope_window: int
    slope_thresh: float
    merge_radius: float
    end_trim: int
    range_table: Path
    mode: DetectionMode
    calib_margin: int
    bpm: float
    gap_tolerance: int
    out: Path

    def __post_init__(self):
        positive = ('fps', 'bpm', 'canny_sigma', 'dev_thresh', 'slope_thresh', 'palm_radius_cap')
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f'{name.upper()} must be > 0, got {getattr(self, name)}')
        non_negative = (
            'idle_until', 'min_area_overhead', 'min_area_side', 'min_area_diff', 'dist_floor',
            'border_margin', 'finger_min_area', 'merge_radius', 'end_trim', 'calib_margin', 'gap_tolerance',
        )
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ValueError(f'{name.upper()} must be >= 0, got {getattr(self, name)}')
        if self.connectivity not in (4, 8):
            raise ValueError(f'CONNECTIVITY must be 4 or 8, got {self.connectivity}')
        if self.max_fingers < 1 or self.slope_window < 2:
            raise ValueError('MAX_FINGERS must be >= 1 and SLOPE_WINDOW >= 2')
        if not 0 <= self.canny_low < self.canny_high:
            raise ValueError(f'need 0 <= CANNY_LOW < CANNY_HIGH, got {self.canny_low}, {self.canny_high}')
        lo, hi = self.dehaze_clip
        if not 0 <= lo < hi <= 100:
            raise ValueError(f'DEHAZE_CLIP must satisfy 0 <= lo < hi <= 100, got {lo},{hi}')
        if self.palm_radius is not None and self.palm_radius <= 0:
            raise ValueError(f'PALM_RADIUS must be > 0, got {self.palm_radius}')
        if min(self.palm_rect) <= 0:
            raise ValueError(f'PALM_RECT must be positive, got {self.palm_rect}')

    @classmethod
    def _codec(cls, name: str):
        kinds = {
            'hand_band': 'band', 'key_band': 'band', 'focus': 'rect', 'dehaze_clip': 'pair',
            'palm_rect': 'pair', 'palm_radius': 'optional_float', 'range_table': 'path', 'out': 'path',
            'mode': 'mode',
        }
        field_type = {f.name: f.type for f in fields(cls)}[name]
        kind = kinds.get(name) or ('int' if field_type in (int, 'int') else 'float')
        return _CODECS[kind]

    @classmethod
    def from_mapping(cls, values: dict, base: Optional['RunConfig'] = None, source: str = '<config>') -> 'RunConfig':
        """
        Build a config from upper-case KEY -> text pairs; keys missing from
        values are taken from base. Unknown keys are rejected.
        """
        names = {f.name for f in fields(cls)}
        unknown = sorted(k for k in values if k.lower() not in names or not k.isupper())
        if unknown:
            raise ValueError(f'{source}: unknown config keys: {", ".join(unknown)}')
        parsed = {}
        for key, text in values.items():
            name = key.lower()
            try:
                parsed[name] = cls._codec(name)[0]((text or '').strip())
            except ValueError as e:
                raise ValueError(f'{source}: invalid {key}: {e}') from e
        if base is not None:
            return replace(base, **parsed)
        missing = names - parsed.keys()
        if missing:
            raise ValueError(f'{source}: missing config keys: {", ".join(sorted(m.upper() for m in missing))}')
        return cls(**parsed)

    @classmethod
    def defaults(cls) -> 'RunConfig':
        return cls.from_mapping(settings.PIANOVISION, source='settings.PIANOVISION')

    @classmethod
    def load(cls, path: Union[str, Path, None] = None) -> 'RunConfig':
        config = cls.defaults()
        if path is None:
            return config
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f'Config file not found: {path}')
        config = cls.from_mapping(dotenv_values(path), base=config, source=str(path))
        logger.info('Loaded run config from %s', path)
        return config

    def with_overrides(self, **overrides) -> 'RunConfig':
        """Apply typed overrides (command-line flags); None means not given."""
        given = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **given) if given else self

    def serialize(self) -> str:
        lines = [f'{f.name.upper()}={self._codec(f.name)[1](getattr(self, f.name))}' for f in fields(self)]
        return '\n'.join(lines) + '\n'
