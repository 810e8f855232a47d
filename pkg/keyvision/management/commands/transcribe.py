"""
Turn a key event log into a plain-text score.
"""
import logging
from pathlib import Path

from keyvision.keypress import parse_event
from keyvision.management.base import PipelineCommand
from keyvision.reports import write_lines
from keyvision.transcribe import emit_score, events_to_notes, to_note_events

logger = logging.getLogger(__name__)


class Command(PipelineCommand):
    help = 'Merge key events into notes and classify their durations'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--log', type=Path, required=True, help='Event log written by detect_keys')

    def run(self, config, **options):
        log: Path = options['log']
        if not log.is_file():
            raise FileNotFoundError(f'Event log not found: {log}')
        lines = [ln for ln in log.read_text(encoding='utf-8').splitlines() if ln.strip()]
        events = sorted((parse_event(ln) for ln in lines), key=lambda e: e.timestamp)

        notes = to_note_events(events_to_notes(events, 1.0 / config.fps, config.gap_tolerance), config.bpm)
        score = emit_score(notes, config.bpm, log.name)
        output = config.out / 'score.txt'
        write_lines(output, score.splitlines())
        logger.info('Transcribed %d events into %d notes', len(events), len(notes))
        self.stdout.write(f'{len(notes)} notes -> {output}')
