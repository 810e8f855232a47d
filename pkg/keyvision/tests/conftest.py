"""
Shared fixtures: synthetic keyboards, hands and small rasters.

Everything is generated in-process so runs are reproducible and need no
recorded video.
"""
from pathlib import Path

import numpy as np
import pytest
from django.conf import settings

from keyvision.imagecore import Frame
from keyvision.keypress import load_table
from keyvision.synthkb import FingerSpec, HandSpec, KeyboardSpec, SynthScene, spread_fingers

CODE2_TOPS = (290, 310, 325, 350)
CHORD_A = frozenset({'C3', 'E3', 'G3', 'C4', 'E4', 'G4'})
CHORD_B = frozenset({'D3', 'F3b', 'A3', 'D4', 'F4b', 'A4'})


@pytest.fixture
def code2_table():
    return load_table(settings.PIANOVISION['RANGE_TABLE'])


@pytest.fixture
def code2_scene() -> SynthScene:
    """Four keys C3, C3b, D3, D3b whose pressed lines start at the Code 2 rows."""
    return SynthScene(keyboard=KeyboardSpec(first='C3', count=4, tops=CODE2_TOPS))


@pytest.fixture
def keyboard_scene() -> SynthScene:
    """Default 61-key keyboard, C2..C7."""
    return SynthScene()


def _hand(center, segments=(30.0, 20.0, 15.0), bends=(0.0, 0.0)) -> HandSpec:
    fingers = tuple(FingerSpec(a, 8.0, segments, bends) for a in spread_fingers(5))
    return HandSpec(center=center, palm_radius=40.0, fingers=fingers)


@pytest.fixture
def two_hand_scene() -> SynthScene:
    return SynthScene(hands=(_hand((180.0, 230.0)), _hand((460.0, 230.0))))


@pytest.fixture
def one_hand_scene() -> SynthScene:
    return SynthScene(hands=(_hand((320.0, 230.0)),))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def solid_frame():
    def make(width=8, height=6, color=(10, 20, 30), timestamp=0.0) -> Frame:
        pixels = np.empty((height, width, 3), dtype=np.uint8)
        pixels[...] = color
        return Frame(pixels, timestamp)
    return make


@pytest.fixture
def write_manifest(tmp_path: Path):
    """Save frames as PPM files under tmp_path and return the manifest path."""
    from keyvision.imagecore import save_frame

    def make(frames, name='frames.txt', suffix='.ppm') -> Path:
        lines = []
        for i, frame in enumerate(frames):
            rel = f'f{i:04d}{suffix}'
            save_frame(frame, tmp_path / rel)
            lines.append(rel)
        manifest = tmp_path / name
        manifest.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        return manifest
    return make
