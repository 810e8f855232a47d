"""
End-to-end runs of the management commands on synthetic input.
"""
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from keyvision.calib import CalibrationScript, format_script, parse_script
from keyvision.keypress import dump_table, load_table
from keyvision.management.commands import segment_hands
from keyvision.synthkb import render_hand_frame, render_sequence

LOG1_SCRIPT = 'idle_until,0.4\nC3,0.5,0.7\nC3b,0.8,1.0\nD3,1.1,1.3\nD3b,1.4,1.6\n'

SCENE = """\
KEYBOARD_FIRST=C3
KEYBOARD_KEYS=4
KEYBOARD_TOPS=290,310,325,350
NOISE_SIGMA=4
NOISE_FLIP=0.001
SEED=9
HAND_1_CENTER=180,230
HAND_2_CENTER=460,230
"""


def _run(name, **options):
    out = StringIO()
    call_command(name, stdout=out, **options)
    return out.getvalue()


def _rows(path):
    return [ln for ln in path.read_text(encoding='utf-8').splitlines() if ln and not ln.startswith('#')]


@pytest.fixture
def log1_manifest(code2_scene, write_manifest):
    frames, truth = render_sequence(code2_scene, parse_script(LOG1_SCRIPT), fps=10)
    return write_manifest(frames), truth


class TestDetectKeys:
    def test_log1_scenario(self, tmp_path, log1_manifest):
        manifest, truth = log1_manifest
        out = tmp_path / 'out'
        _run('detect_keys', manifest=manifest, out=out, fps=10.0)
        expected = [f'Keys pressed: {next(iter(keys))}; at {t:.3f} sec' for t, keys in truth if keys]
        assert (out / 'keys.log').read_text(encoding='utf-8').splitlines() == expected
        assert expected[0] == 'Keys pressed: C3; at 0.500 sec'
        annotated = sorted(out.glob('*.annotated.ppm'))
        assert len(annotated) == len(truth)

    def test_missing_range_table(self, tmp_path, log1_manifest, settings):
        missing = tmp_path / 'no_ranges.csv'
        settings.PIANOVISION = {**settings.PIANOVISION, 'RANGE_TABLE': str(missing)}
        with pytest.raises(CommandError, match='no_ranges.csv'):
            _run('detect_keys', manifest=log1_manifest[0], out=tmp_path / 'out', fps=10.0)

    def test_idle_input_gives_empty_log(self, tmp_path, code2_scene, write_manifest):
        frames, _ = render_sequence(code2_scene, CalibrationScript(5.0, ()), fps=10, duration=0.5)
        config = tmp_path / 'run.env'
        config.write_text('IDLE_UNTIL=5\n', encoding='utf-8')
        out = tmp_path / 'out'
        _run('detect_keys', manifest=write_manifest(frames), out=out, fps=10.0, config=config)
        assert (out / 'keys.log').read_text(encoding='utf-8') == ''

    def test_dedup_flag(self, tmp_path, log1_manifest):
        out = tmp_path / 'out'
        _run('detect_keys', manifest=log1_manifest[0], out=out, fps=10.0, mode='dedup')
        assert (out / 'keys.log').read_text(encoding='utf-8').count('Keys pressed') == 8

    def test_manifest_is_required(self):
        with pytest.raises(CommandError):
            _run('detect_keys')


class TestCalibrate:
    def test_code2_ranges(self, tmp_path, log1_manifest, code2_table):
        script = tmp_path / 'script.txt'
        script.write_text(LOG1_SCRIPT, encoding='utf-8')
        out = tmp_path / 'out'
        _run('calibrate', manifest=log1_manifest[0], script=script, out=out, fps=10.0)
        assert load_table(out / 'ranges.csv') == code2_table
        assert (out / 'ranges.csv').read_text(encoding='utf-8') == dump_table(code2_table)

    def test_repeat_runs_are_identical(self, tmp_path, log1_manifest):
        script = tmp_path / 'script.txt'
        script.write_text(LOG1_SCRIPT, encoding='utf-8')
        first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
        for output in (first, second):
            _run('calibrate', manifest=log1_manifest[0], script=script, output=output, out=tmp_path, fps=10.0)
        assert first.read_bytes() == second.read_bytes()

    def test_unobserved_key_fails(self, tmp_path, log1_manifest):
        script = tmp_path / 'script.txt'
        script.write_text(LOG1_SCRIPT + 'E3,1.7,1.9\n', encoding='utf-8')
        with pytest.raises(CommandError, match='key E3 never observed'):
            _run('calibrate', manifest=log1_manifest[0], script=script, out=tmp_path, fps=10.0)


class TestTranscribe:
    def test_log1_c3_note(self, tmp_path):
        log = tmp_path / 'keys.log'
        log.write_text(
            'Keys pressed: C3; at 24.413 sec\n'
            'Keys pressed: C3; at 24.482 sec\n'
            'Keys pressed: C3; at 24.516 sec\n',
            encoding='utf-8',
        )
        _run('transcribe', log=log, out=tmp_path, fps=1 / 0.0345)
        score = (tmp_path / 'score.txt').read_text(encoding='utf-8')
        assert score == '# bpm=120 source=keys.log\n24.413 C3 sixteenth 0.138\n'

    def test_empty_log(self, tmp_path):
        log = tmp_path / 'keys.log'
        log.write_text('', encoding='utf-8')
        _run('transcribe', log=log, out=tmp_path, bpm=60.0)
        assert (tmp_path / 'score.txt').read_text(encoding='utf-8') == '# bpm=60 source=keys.log\n'

    def test_bad_line(self, tmp_path):
        log = tmp_path / 'keys.log'
        log.write_text('C3 pressed\n', encoding='utf-8')
        with pytest.raises(CommandError, match='not a key event line'):
            _run('transcribe', log=log, out=tmp_path)

    def test_missing_log(self, tmp_path):
        with pytest.raises(CommandError, match='Event log not found'):
            _run('transcribe', log=tmp_path / 'none.log', out=tmp_path)


def _render(tmp_path, out, scene_text=SCENE, **options):
    scene = tmp_path / 'scene.env'
    scene.write_text(scene_text, encoding='utf-8')
    script = tmp_path / 'script.txt'
    script.write_text(LOG1_SCRIPT, encoding='utf-8')
    _run('render', scene=scene, script=script, out=out, fps=10.0, **options)
    return out


class TestRender:
    def test_outputs(self, tmp_path):
        out = _render(tmp_path, tmp_path / 'out')
        names = (out / 'frames.txt').read_text(encoding='utf-8').splitlines()
        assert len(names) == 21
        assert all((out / n).is_file() for n in names)
        truth = (out / 'truth.csv').read_text(encoding='utf-8').splitlines()
        assert truth[0] == 't,key,top'
        assert truth[1] == '0.500000,C3,290'

    def test_same_seed_same_bytes(self, tmp_path):
        a = _render(tmp_path, tmp_path / 'a')
        b = _render(tmp_path, tmp_path / 'b')
        c = _render(tmp_path, tmp_path / 'c', seed=10)
        frame = 'frames/frame_00003.ppm'
        assert (a / frame).read_bytes() == (b / frame).read_bytes()
        assert (a / frame).read_bytes() != (c / frame).read_bytes()

    def test_rendered_frames_feed_detection(self, tmp_path):
        out = _render(tmp_path, tmp_path / 'out')
        _run('detect_keys', manifest=out / 'frames.txt', out=out / 'det', fps=10.0)
        keys = [ln.split(': ')[1].split(';')[0] for ln in _rows(out / 'det' / 'keys.log')]
        assert list(dict.fromkeys(keys)) == ['C3', 'C3b', 'D3', 'D3b']

    def test_hand_outputs(self, tmp_path):
        out = _render(tmp_path, tmp_path / 'out', hands='overhead')
        assert (out / 'hands.ppm').is_file()
        assert (out / 'hands.txt').read_text(encoding='utf-8') == 'hands.ppm\n'
        # straight fingers carry no joints
        assert _rows(out / 'hands_truth.txt') == []

    def test_bent_hand_truth(self, tmp_path):
        scene = SCENE + 'HAND_1_BENDS=20,0\nHAND_2_BENDS=20,15\n'
        out = _render(tmp_path, tmp_path / 'out', scene_text=scene, hands='overhead')
        rows = [r.split() for r in _rows(out / 'hands_truth.txt')]
        assert len(rows) == 5 * 1 + 5 * 2
        assert {(r[0], r[4]) for r in rows} == {('1', '1'), ('2', '1'), ('2', '2')}

    def test_hands_need_a_hand(self, tmp_path):
        scene = tmp_path / 'scene.env'
        scene.write_text('KEYBOARD_KEYS=4\n', encoding='utf-8')
        with pytest.raises(CommandError, match='no hands'):
            _run('render', scene=scene, out=tmp_path, hands='side')

    def test_missing_scene(self, tmp_path):
        with pytest.raises(CommandError, match='Scene file not found'):
            _run('render', scene=tmp_path / 'none.env', out=tmp_path)


class TestSegmentHands:
    def test_two_hands_five_fingers(self, tmp_path):
        out = _render(tmp_path, tmp_path / 'out', hands='overhead')
        _run('segment_hands', manifest=out / 'hands.txt', out=out / 'seg', dump_masks=True)
        rows = _rows(out / 'seg' / 'fingers.txt')
        hands = [r.split()[1] for r in rows]
        assert hands.count('left') == 5 and hands.count('right') == 5
        joints = (out / 'seg' / 'joints.txt').read_text(encoding='utf-8').splitlines()
        assert joints[0] == '# frame_ts hand finger_label joint_ordinal x y cue'
        # the scene's fingers are straight
        assert _rows(out / 'seg' / 'joints.txt') == []
        assert any((out / 'seg' / 'masks').glob('*_left_hand.png'))
        assert any((out / 'seg' / 'masks').glob('*_lines.png'))

    def test_one_hand_frame_is_skipped(self, tmp_path, one_hand_scene, write_manifest):
        manifest = write_manifest([render_hand_frame(one_hand_scene)])
        _run('segment_hands', manifest=manifest, out=tmp_path / 'seg')
        text = (tmp_path / 'seg' / 'fingers.txt').read_text(encoding='utf-8')
        assert '# skipped 0.000: cannot split: single cluster' in text
        assert _rows(tmp_path / 'seg' / 'fingers.txt') == []

    def test_side_view(self, tmp_path, one_hand_scene, write_manifest):
        manifest = write_manifest([render_hand_frame(one_hand_scene, 'side')])
        _run('segment_hands', manifest=manifest, out=tmp_path / 'seg', view='side')
        rows = _rows(tmp_path / 'seg' / 'fingers.txt')
        assert 1 <= len(rows) <= 5
        assert all(r.split()[1] == 'hand' for r in rows)

    def test_failing_finger_keeps_the_others(self, tmp_path, monkeypatch):
        out = _render(tmp_path, tmp_path / 'out', hands='overhead')
        real = segment_hands.analyse_finger
        seen = []

        def first_finger_fails(blob, *args, **kwargs):
            seen.append(blob)
            if len(seen) == 1:
                raise ValueError('need edge pixels on at least 2 rows to fit edge lines')
            return real(blob, *args, **kwargs)

        monkeypatch.setattr(segment_hands, 'analyse_finger', first_finger_fails)
        _run('segment_hands', manifest=out / 'hands.txt', out=out / 'seg')
        text = (out / 'seg' / 'fingers.txt').read_text(encoding='utf-8')
        assert f'# skipped 0.000: left finger {seen[0].label}: need edge pixels' in text
        assert len(_rows(out / 'seg' / 'fingers.txt')) == 9


def test_script_written_by_format_script_is_accepted(tmp_path, log1_manifest, code2_table):
    script = tmp_path / 'script.txt'
    script.write_text(format_script(parse_script(LOG1_SCRIPT)), encoding='utf-8')
    _run('calibrate', manifest=log1_manifest[0], script=script, out=tmp_path, fps=10.0)
    assert load_table(tmp_path / 'ranges.csv') == code2_table
