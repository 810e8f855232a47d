"""
Render a synthetic keyboard sequence (and optionally a hand frame) with
ground truth.
"""
import logging
from dataclasses import replace
from pathlib import Path

from keyvision.calib import CalibrationScript, load_script
from keyvision.imagecore import save_frame
from keyvision.management.base import PipelineCommand
from keyvision.reports import write_lines
from keyvision.synthkb import load_scene, render_hand, render_hand_frame, render_sequence, write_truth

logger = logging.getLogger(__name__)


class Command(PipelineCommand):
    help = 'Render synthetic keyboard frames and ground truth from a scene file'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--scene', type=Path, required=True, help='Scene file (KEYBOARD_*, NOISE_*, HAND_<n>_*)')
        parser.add_argument('--script', type=Path, help='Press timeline; chords join keys with +')
        parser.add_argument('--hands', choices=['overhead', 'side'], help='Also render the scene hands')

    def run(self, config, **options):
        scene = load_scene(options['scene'])
        if options.get('seed') is not None:
            scene = replace(scene, seed=options['seed'])
        script = load_script(options['script']) if options.get('script') else CalibrationScript(0.0, ())

        frames, truth = render_sequence(scene, script, config.fps)
        frame_dir = config.out / 'frames'
        frame_dir.mkdir(parents=True, exist_ok=True)
        names = []
        for i, frame in enumerate(frames):
            name = f'frames/frame_{i:05d}.ppm'
            save_frame(frame, config.out / name)
            names.append(name)
        write_lines(config.out / 'frames.txt', names)
        write_lines(config.out / 'truth.csv', write_truth(truth, scene).splitlines())

        view = options.get('hands')
        if view:
            if not scene.hands:
                raise ValueError('scene defines no hands (HAND_<n>_CENTER)')
            save_frame(render_hand_frame(scene, view), config.out / 'hands.ppm')
            write_lines(config.out / 'hands.txt', ['hands.ppm'])
            _, hands = render_hand(scene, view)
            rows = ['# hand center_x center_y finger joint x y']
            for h, hand in enumerate(hands, start=1):
                for f, finger in enumerate(hand.fingers, start=1):
                    rows += [f'{h} {hand.center[0]:g} {hand.center[1]:g} {f} {j} {x:.1f} {y:.1f}'
                             for j, (x, y) in enumerate(finger.joints, start=1)]
            write_lines(config.out / 'hands_truth.txt', rows)
        self.stdout.write(f'{len(frames)} frames -> {config.out}')
