"""
Shared plumbing for the PianoVision management commands: common flags,
run-config resolution and translation of pipeline errors into CommandError.
"""
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from keyvision.config import RunConfig
from keyvision.keypress import DetectionMode

logger = logging.getLogger(__name__)


class PipelineCommand(BaseCommand):
    """
    Subclasses implement run(config, **options). Any ValueError or OSError
    escaping run() becomes a CommandError (exit status 1).
    """

    needs_manifest = False

    def add_arguments(self, parser):
        parser.add_argument('--config', type=Path, help='Run-config file (KEY=value lines)')
        parser.add_argument('--fps', type=float, help='Frame rate of the input sequence')
        parser.add_argument(
            '--manifest', type=Path, required=self.needs_manifest,
            help='Text file listing one frame path per line',
        )
        parser.add_argument('--out', type=Path, help='Output directory')
        parser.add_argument('--mode', choices=[m.value for m in DetectionMode], help='Key list mode')
        parser.add_argument('--bpm', type=float, help='Tempo for duration classification')
        parser.add_argument('--seed', type=int, help='Renderer seed')

    def resolve_config(self, options) -> RunConfig:
        config = RunConfig.load(options.get('config'))
        mode = options.get('mode')
        return config.with_overrides(
            fps=options.get('fps'),
            out=options.get('out'),
            mode=DetectionMode(mode) if mode else None,
            bpm=options.get('bpm'),
        )

    def handle(self, *args, **options):
        try:
            config = self.resolve_config(options)
            config.out.mkdir(parents=True, exist_ok=True)
            run_options = {k: v for k, v in options.items() if k != 'config'}
            self.run(config, **run_options)
        except CommandError:
            raise
        except (ValueError, OSError) as e:
            logger.error('%s failed: %s', self.__module__.rsplit('.', 1)[-1], e)
            raise CommandError(str(e)) from e

    def run(self, config: RunConfig, **options):
        raise NotImplementedError
