"""
Deterministic synthetic renderer: keyboards seen from the side-above camera
and binary hand masks, each with exact ground truth.

A keyboard frame is a white key surface with a dark body strip on the left,
a bright highlight strip on the right and one short dark line marking the
left side of every key. Pressing a key moves its line press_shift px to the
right, so the difference against the idle frame is one small component whose
top row is the key's configured top.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from dotenv import dotenv_values

from .binops import stamp_disk, stamp_rect
from .calib import CalibrationScript
from .imagecore import BinaryMask, Frame
from .keypress import KeyRange, KeyRangeTable, key_names

logger = logging.getLogger(__name__)

BODY_VALUE = 10
SURFACE_VALUE = 230
HIGHLIGHT_VALUE = 250
LINE_VALUE = 60
STRIP_WIDTH = 20

SKIN_COLOR = (135, 52, 32)
BACKDROP_COLOR = (30, 60, 200)

# fingers start this far inside the palm, as a fraction of its radius
FINGER_ROOT = 0.6


def _direction(angle: float) -> tuple[float, float]:
    """Unit vector for a finger angle: 0 points up, positive turns left on screen."""
    theta = math.radians(angle)
    return -math.sin(theta), -math.cos(theta)


@dataclass(frozen=True)
class KeyboardSpec:
    first: str = 'C2'
    count: int = 61
    top_base: int = 20
    top_step: int = 5
    tops: tuple[int, ...] = ()
    press_shift: int = 4
    size: tuple[int, int] = (640, 360)
    x_start: int = 30
    spacing: int = 9
    line_width: int = 2
    line_length: int = 8

    def __post_init__(self):
        width, height = self.size
        if self.count < 1:
            raise ValueError(f'keyboard needs at least one key, got {self.count}')
        if self.press_shift <= 0:
            raise ValueError(f'press_shift must be > 0, got {self.press_shift}')
        if not self.line_width <= self.press_shift <= self.spacing - 2 * self.line_width:
            raise ValueError(
                f'press_shift {self.press_shift} must lie in [{self.line_width}, {self.spacing - 2 * self.line_width}]'
            )
        if self.tops and len(self.tops) != self.count:
            raise ValueError(f'{len(self.tops)} key tops given for {self.count} keys')
        right = self.x_start + self.spacing * (self.count - 1) + self.press_shift + self.line_width
        if self.x_start < STRIP_WIDTH or right > width - STRIP_WIDTH:
            raise ValueError(f'{self.count} keys do not fit a {width} px wide frame')
        for key, top in self.key_tops.items():
            if top < 0 or top + self.line_length > height:
                raise ValueError(f'key {key} at row {top} does not fit a {height} px high frame')

    @property
    def names(self) -> list[str]:
        return key_names(self.first, self.count)

    @property
    def key_tops(self) -> dict[str, int]:
        tops = self.tops or tuple(self.top_base + i * self.top_step for i in range(self.count))
        return dict(zip(self.names, tops))


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    flip: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f'noise sigma must be >= 0, got {self.sigma}')
        if not 0 <= self.flip <= 1:
            raise ValueError(f'flip probability must be in [0, 1], got {self.flip}')

    @property
    def active(self) -> bool:
        return self.sigma > 0 or self.flip > 0


@dataclass(frozen=True)
class FingerSpec:
    """Chain of straight segments; bends[i] turns the direction between segments i and i+1."""

    angle: float
    width: float
    segments: tuple[float, ...]
    bends: tuple[float, ...] = ()

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f'finger width must be > 0, got {self.width}')
        if not self.segments or any(s <= 0 for s in self.segments):
            raise ValueError('finger segments must be positive lengths')
        if len(self.bends) != len(self.segments) - 1:
            raise ValueError(f'{len(self.segments)} segments need {len(self.segments) - 1} bends')

    @property
    def length(self) -> float:
        return float(sum(self.segments))


@dataclass(frozen=True)
class HandSpec:
    center: tuple[float, float]
    palm_radius: float
    fingers: tuple[FingerSpec, ...]
    palm_rect: tuple[float, float] = (120.0, 40.0)
    palm_angle: float = 32.0


@dataclass(frozen=True)
class SynthScene:
    keyboard: KeyboardSpec = field(default_factory=KeyboardSpec)
    hands: tuple[HandSpec, ...] = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0


@dataclass
class FingerTruth:
    mask: BinaryMask
    joints: list[tuple[float, float]]
    joint_axial: list[float]


@dataclass
class HandTruth:
    center: tuple[float, float]
    fingers: list[FingerTruth]


def _blank_keyboard(kb: KeyboardSpec) -> np.ndarray:
    width, height = kb.size
    gray = np.full((height, width), SURFACE_VALUE, dtype=np.uint8)
    gray[:, :STRIP_WIDTH] = BODY_VALUE
    gray[:, width - STRIP_WIDTH:] = HIGHLIGHT_VALUE
    return gray


def render_keyboard(scene: SynthScene, pressed: frozenset = frozenset()) -> tuple[Frame, dict[str, int]]:
    """
    Noise-free keyboard frame with the given keys pressed. Ground truth maps
    each pressed key to the top row of its shifted line.
    """
    kb = scene.keyboard
    tops = kb.key_tops
    unknown = set(pressed) - tops.keys()
    if unknown:
        raise ValueError(f'unknown key(s): {", ".join(sorted(unknown))}')
    gray = _blank_keyboard(kb)
    truth = {}
    for i, (key, top) in enumerate(tops.items()):
        x = kb.x_start + i * kb.spacing
        if key in pressed:
            x += kb.press_shift
            truth[key] = top
        gray[top:top + kb.line_length, x:x + kb.line_width] = LINE_VALUE
    return Frame(np.repeat(gray[:, :, None], 3, axis=2)), truth


def apply_noise(frame: Frame, noise: NoiseSpec, rng: np.random.Generator) -> Frame:
    """Additive Gaussian noise, then whole-pixel inversion with probability noise.flip."""
    if not noise.active:
        return frame
    pixels = frame.pixels.astype(np.float64)
    if noise.sigma > 0:
        pixels = pixels + rng.normal(0.0, noise.sigma, pixels.shape)
    pixels = np.clip(np.rint(pixels), 0, 255)
    if noise.flip > 0:
        flips = rng.random(pixels.shape[:2]) < noise.flip
        pixels[flips] = 255 - pixels[flips]
    return frame.with_pixels(pixels.astype(np.uint8))


def render_sequence(
    scene: SynthScene,
    script: CalibrationScript,
    fps: float,
    duration: Optional[float] = None,
) -> tuple[list[Frame], list[tuple[float, frozenset]]]:
    """
    Frame i at t = i / fps shows the keys the script holds at t. Noise for
    frame i is drawn from a generator seeded with (scene.seed, i).
    """
    if fps <= 0:
        raise ValueError(f'fps must be > 0, got {fps}')
    if duration is None:
        last = max([p.end for p in script.presses] + [script.idle_until])
        duration = last + 0.5
    count = max(1, math.ceil(duration * fps))

    cache: dict[frozenset, Frame] = {}
    frames, truth = [], []
    for i in range(count):
        t = i / fps
        pressed = script.active_at(t)
        if pressed not in cache:
            cache[pressed] = render_keyboard(scene, pressed)[0]
        frame = replace(cache[pressed], timestamp=t)
        frames.append(apply_noise(frame, scene.noise, np.random.default_rng([scene.seed, i])))
        truth.append((t, pressed))
    logger.info('Rendered %d keyboard frames at %g fps', count, fps)
    return frames, truth


def range_table(scene: SynthScene, margin: int = 2) -> KeyRangeTable:
    return KeyRangeTable(KeyRange(k, top - margin, top + margin) for k, top in scene.keyboard.key_tops.items())


def render_finger(
    width: int,
    height: int,
    base: tuple[float, float],
    finger: FingerSpec,
) -> tuple[BinaryMask, list[tuple[float, float]], list[float]]:
    """
    Stamp a finger as rotated rectangles, one per segment, with a disk of the
    finger's width at every non-zero bend. Returns the mask, joint positions
    and the joints' distance from the base along the finger. Zero bends are
    not joints.
    """
    mask = np.zeros((height, width), dtype=bool)
    joints, axial = [], []
    x, y = base
    angle = finger.angle
    travelled = 0.0
    for i, seg in enumerate(finger.segments):
        ux, uy = _direction(angle)
        end = (x + seg * ux, y + seg * uy)
        mid = ((x + end[0]) / 2, (y + end[1]) / 2)
        mask |= stamp_rect(width, height, mid, finger.width, seg, angle)
        x, y = end
        travelled += seg
        if i < len(finger.bends) and finger.bends[i] != 0:
            mask |= stamp_disk(width, height, end, finger.width / 2)
            joints.append(end)
            axial.append(travelled)
            angle += finger.bends[i]
    return mask, joints, axial


def render_hand(scene: SynthScene, view: str = 'overhead') -> tuple[BinaryMask, list[HandTruth]]:
    """
    Binary mask of every hand in the scene: a palm disk (overhead) or a tilted
    palm band (side), plus the fingers. Finger truth masks exclude the palm.
    """
    if view not in ('overhead', 'side'):
        raise ValueError(f"view must be 'overhead' or 'side', got {view!r}")
    width, height = scene.keyboard.size
    mask = np.zeros((height, width), dtype=bool)
    truths = []
    for hand in scene.hands:
        if not 1 <= len(hand.fingers) <= 5:
            raise ValueError(f'a hand needs 1 to 5 fingers, got {len(hand.fingers)}')
        if view == 'overhead':
            palm = stamp_disk(width, height, hand.center, hand.palm_radius)
        else:
            palm = stamp_rect(width, height, hand.center, *hand.palm_rect, hand.palm_angle)
        fingers = []
        for finger in hand.fingers:
            ux, uy = _direction(finger.angle)
            reach = FINGER_ROOT * hand.palm_radius
            base = (hand.center[0] + reach * ux, hand.center[1] + reach * uy)
            fmask, joints, axial = render_finger(width, height, base, finger)
            fingers.append(FingerTruth(fmask & ~palm, joints, axial))
            mask |= fmask
        mask |= palm
        truths.append(HandTruth(hand.center, fingers))
    return mask, truths


def render_hand_frame(scene: SynthScene, view: str = 'overhead') -> Frame:
    mask, _ = render_hand(scene, view)
    pixels = np.empty(mask.shape + (3,), dtype=np.uint8)
    pixels[...] = BACKDROP_COLOR
    pixels[mask] = SKIN_COLOR
    return Frame(pixels)


def spread_fingers(count: int, spacing: float = 28.0) -> list[float]:
    """Finger angles fanned symmetrically about straight up."""
    return [spacing * (i - (count - 1) / 2) for i in range(count)]


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(',') if v.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(',') if v.strip())


def _fmt(values) -> str:
    return ','.join(f'{v:g}' for v in values)


_SCENE_KEYS = {
    'KEYBOARD_FIRST', 'KEYBOARD_KEYS', 'KEYBOARD_TOP_BASE', 'KEYBOARD_TOP_STEP', 'KEYBOARD_TOPS',
    'KEYBOARD_SHIFT', 'KEYBOARD_SIZE', 'NOISE_SIGMA', 'NOISE_FLIP', 'SEED',
}
_HAND_FIELDS = ('CENTER', 'RADIUS', 'ANGLES', 'WIDTH', 'SEGMENTS', 'BENDS', 'PALM_RECT', 'PALM_ANGLE')


def parse_scene(values: dict, source: str = '<scene>') -> SynthScene:
    """
    Build a scene from KEY=value pairs. Hands are HAND_<n>_* groups; all
    fingers of a hand share width, segments and bends.
    """
    hand_ids = sorted({k.split('_')[1] for k in values if k.startswith('HAND_')}, key=int)
    known = set(_SCENE_KEYS) | {f'HAND_{n}_{f}' for n in hand_ids for f in _HAND_FIELDS}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f'{source}: unknown scene keys: {", ".join(unknown)}')
    def get(key, default):
        return values.get(key) or default

    try:
        keyboard = KeyboardSpec(
            first=get('KEYBOARD_FIRST', 'C2'),
            count=int(get('KEYBOARD_KEYS', 61)),
            top_base=int(get('KEYBOARD_TOP_BASE', 20)),
            top_step=int(get('KEYBOARD_TOP_STEP', 5)),
            tops=_ints(get('KEYBOARD_TOPS', '')),
            press_shift=int(get('KEYBOARD_SHIFT', 4)),
            size=_ints(get('KEYBOARD_SIZE', '640,360')),
        )
        hands = []
        for n in hand_ids:
            prefix = f'HAND_{n}_'
            segments = _floats(get(prefix + 'SEGMENTS', '30,20,15'))
            bends = _floats(get(prefix + 'BENDS', ''))
            if not bends:
                bends = (0.0,) * (len(segments) - 1)
            width = float(get(prefix + 'WIDTH', 8))
            angles = _floats(get(prefix + 'ANGLES', _fmt(spread_fingers(5))))
            hands.append(HandSpec(
                center=_floats(values[prefix + 'CENTER']),
                palm_radius=float(get(prefix + 'RADIUS', 40)),
                fingers=tuple(FingerSpec(a, width, segments, bends) for a in angles),
                palm_rect=_floats(get(prefix + 'PALM_RECT', '120,40')),
                palm_angle=float(get(prefix + 'PALM_ANGLE', 32)),
            ))
        noise = NoiseSpec(float(get('NOISE_SIGMA', 0)), float(get('NOISE_FLIP', 0)))
        seed = int(get('SEED', 0))
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f'{source}: invalid scene: {e}') from e
    return SynthScene(keyboard, tuple(hands), noise, seed)


def load_scene(path: Union[str, Path]) -> SynthScene:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f'Scene file not found: {path}')
    return parse_scene(dotenv_values(path), str(path))


def dump_scene(scene: SynthScene) -> str:
    kb = scene.keyboard
    lines = [
        f'KEYBOARD_FIRST={kb.first}',
        f'KEYBOARD_KEYS={kb.count}',
        f'KEYBOARD_TOP_BASE={kb.top_base}',
        f'KEYBOARD_TOP_STEP={kb.top_step}',
        f'KEYBOARD_TOPS={_fmt(kb.tops)}',
        f'KEYBOARD_SHIFT={kb.press_shift}',
        f'KEYBOARD_SIZE={_fmt(kb.size)}',
        f'NOISE_SIGMA={scene.noise.sigma:g}',
        f'NOISE_FLIP={scene.noise.flip:g}',
        f'SEED={scene.seed}',
    ]
    for n, hand in enumerate(scene.hands, start=1):
        finger = hand.fingers[0]
        lines += [
            f'HAND_{n}_CENTER={_fmt(hand.center)}',
            f'HAND_{n}_RADIUS={hand.palm_radius:g}',
            f'HAND_{n}_ANGLES={_fmt(f.angle for f in hand.fingers)}',
            f'HAND_{n}_WIDTH={finger.width:g}',
            f'HAND_{n}_SEGMENTS={_fmt(finger.segments)}',
            f'HAND_{n}_BENDS={_fmt(finger.bends)}',
            f'HAND_{n}_PALM_RECT={_fmt(hand.palm_rect)}',
            f'HAND_{n}_PALM_ANGLE={hand.palm_angle:g}',
        ]
    return '\n'.join(lines) + '\n'


def write_truth(truth: Sequence[tuple[float, frozenset]], scene: SynthScene) -> str:
    """Ground-truth sidecar: one 't,key,top' line per pressed key per frame."""
    tops = scene.keyboard.key_tops
    lines = ['t,key,top']
    for t, keys in truth:
        lines += [f'{t:.6f},{k},{tops[k]}' for k in sorted(keys, key=list(tops).index)]
    return '\n'.join(lines) + '\n'
