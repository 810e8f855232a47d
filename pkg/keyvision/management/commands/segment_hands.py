"""
Per-frame hand analysis: palm removal, finger extraction, edge lines and
joints. Frames that fail a precondition are skipped and noted in the report.
"""
import logging

import numpy as np

from keyvision.binops import remove_small
from keyvision.handmotion import (
    analyse_finger,
    draw_edge_lines,
    extract_fingers,
    palm_center,
    remove_palm_disk,
    remove_palm_rect,
    split_hands,
)
from keyvision.imagecore import Frame, load_frames, rgb_bandpass, save_frame
from keyvision.management.base import PipelineCommand
from keyvision.reports import (
    FINGERS_HEADER,
    JOINTS_HEADER,
    finger_row,
    joint_rows,
    skipped_row,
    write_lines,
)

logger = logging.getLogger(__name__)


def _mask_frame(mask) -> Frame:
    return Frame(np.repeat((mask.astype(np.uint8) * 255)[:, :, None], 3, axis=2))


class Command(PipelineCommand):
    help = 'Extract palm, fingers and joints from overhead or side hand frames'
    needs_manifest = True

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--view', choices=['overhead', 'side'], default='overhead')
        parser.add_argument('--dump-masks', action='store_true', help='Write hand, finger and edge-line PNGs')

    def finger_masks(self, frame, config, view):
        """Hand name -> finger mask with the palm removed."""
        conn = config.connectivity
        mask = rgb_bandpass(frame, config.hand_band)
        if view == 'overhead':
            mask = remove_small(mask, config.min_area_overhead, conn)
            hands = dict(zip(('left', 'right'), split_hands(mask, conn)))
        else:
            hands = {'hand': remove_small(mask, config.min_area_side, conn)}

        fingers = {}
        for name, hand in hands.items():
            palm = palm_center(hand, config.dist_floor, config.border_margin, config.palm_radius, config.palm_radius_cap)
            if view == 'overhead':
                fingers[name] = remove_palm_disk(hand, palm)
            else:
                fingers[name] = remove_palm_rect(hand, palm.center, *config.palm_rect, config.palm_rect_angle)
        return hands, fingers

    def run(self, config, **options):
        view = options['view']
        dump = options.get('dump_masks')
        frames = load_frames(options['manifest'], config.fps)
        joint_params = dict(
            dev_thresh=config.dev_thresh,
            slope_window=config.slope_window,
            slope_thresh=config.slope_thresh,
            merge_radius=config.merge_radius,
            end_trim=config.end_trim,
        )

        finger_lines, joint_lines = [FINGERS_HEADER], [JOINTS_HEADER]
        skipped = 0
        for index, frame in enumerate(frames):
            ts = frame.timestamp
            try:
                hands, finger_masks = self.finger_masks(frame, config, view)
                blobs = {
                    name: extract_fingers(fmask, config.finger_min_area, config.max_fingers, config.connectivity)
                    for name, fmask in finger_masks.items()
                }
            except ValueError as e:
                logger.warning('Skipping frame at %.3f sec: %s', ts, e)
                finger_lines.append(skipped_row(ts, str(e)))
                joint_lines.append(skipped_row(ts, str(e)))
                skipped += 1
                continue

            analysed = {}
            for name, hand_blobs in blobs.items():
                analysed[name] = []
                for blob in hand_blobs:
                    try:
                        analysed[name].append(analyse_finger(
                            blob, config.canny_sigma, config.canny_low, config.canny_high, **joint_params
                        ))
                    except ValueError as e:
                        reason = f'{name} finger {blob.label}: {e}'
                        logger.warning('Skipping finger at %.3f sec: %s', ts, reason)
                        finger_lines.append(skipped_row(ts, reason))
                        joint_lines.append(skipped_row(ts, reason))

            for name, fingers in analysed.items():
                for finger in fingers:
                    finger_lines.append(finger_row(ts, name, finger))
                    joint_lines.extend(joint_rows(ts, name, finger))
                if dump:
                    stem = config.out / 'masks' / f'{index:05d}_{name}'
                    stem.parent.mkdir(parents=True, exist_ok=True)
                    save_frame(_mask_frame(hands[name]), f'{stem}_hand.png')
                    for finger in fingers:
                        label = finger.blob.label
                        save_frame(_mask_frame(finger.blob.mask), f'{stem}_finger{label}.png')
                        save_frame(draw_edge_lines(finger.edges, finger.lines), f'{stem}_finger{label}_lines.png')

        write_lines(config.out / 'fingers.txt', finger_lines)
        write_lines(config.out / 'joints.txt', joint_lines)
        self.stdout.write(f'{len(frames) - skipped} of {len(frames)} frames analysed -> {config.out}')
