"""
Learn the key-range table from a scripted calibration recording.
"""
import logging
from pathlib import Path

from keyvision.calib import learn_ranges, load_script
from keyvision.imagecore import load_frames
from keyvision.keypress import dump_table, key_mask
from keyvision.management.base import PipelineCommand
from keyvision.reports import write_lines

logger = logging.getLogger(__name__)


class Command(PipelineCommand):
    help = 'Learn per-key top-row ranges from a calibration script'
    needs_manifest = True

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--script', type=Path, required=True, help='Calibration script (idle_until,<t> then key,start,end)')
        parser.add_argument('--output', type=Path, help='Range CSV path (default <out>/ranges.csv)')

    def run(self, config, **options):
        script = load_script(options['script'])
        frames = load_frames(options['manifest'], config.fps)
        masks = [
            (f.timestamp, key_mask(f, config.key_band, config.focus, config.dehaze_clip, config.frame_rotation))
            for f in frames
        ]
        table = learn_ranges(masks, script, config.calib_margin, config.min_area_diff, config.connectivity)

        output = options.get('output') or config.out / 'ranges.csv'
        write_lines(output, dump_table(table).splitlines())
        self.stdout.write(f'{len(table)} key ranges -> {output}')
