"""
Detect pressed keys in a frame sequence and write keys.log plus one
annotated PPM per frame.
"""
import logging
from pathlib import Path

from keyvision.imagecore import load_frames, read_manifest, save_frame
from keyvision.keypress import load_table, run_detection
from keyvision.management.base import PipelineCommand
from keyvision.reports import event_log, write_lines

logger = logging.getLogger(__name__)


class Command(PipelineCommand):
    help = 'Detect pressed keys by differencing against the idle reference frame'
    needs_manifest = True

    def run(self, config, **options):
        manifest: Path = options['manifest']
        table = load_table(config.range_table)
        frames = load_frames(manifest, config.fps)
        result = run_detection(
            frames,
            config.key_band,
            config.focus,
            config.idle_until,
            table,
            min_area=config.min_area_diff,
            mode=config.mode,
            clip=config.dehaze_clip,
            rotation=config.frame_rotation,
            connectivity=config.connectivity,
        )

        write_lines(config.out / 'keys.log', event_log(result.events))
        for path, frame in zip(read_manifest(manifest), result.annotated):
            save_frame(frame, config.out / f'{path.stem}.annotated.ppm')
        self.stdout.write(f'{len(result.events)} key events over {len(frames)} frames -> {config.out / "keys.log"}')
