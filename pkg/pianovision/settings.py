"""
Django settings for the PianoVision project.

Only the management commands are used; there is no web surface, database or
static files. Pipeline defaults live in PIANOVISION and can be overridden from
the environment (or a .env file) as PIANOVISION_<KEY>.
"""
import os
from pathlib import Path

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

BASE_DIR = Path(__file__).resolve().parent.parent

DEBUG = os.environ.get('DJANGO_DEBUG', 'False').lower() in ('true', '1', 'yes')

INSTALLED_APPS = [
    'keyvision',
]

DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Pipeline defaults; values are strings in RunConfig file syntax.
_PIANOVISION_DEFAULTS = {
    'FPS': '29',
    'HAND_BAND': '90,180,40,65,10,55',
    'KEY_BAND': '20,100,20,100,20,100',
    'FOCUS': '',
    'FRAME_ROTATION': '0',
    'DEHAZE_CLIP': '1,99',
    'IDLE_UNTIL': '0',
    'MIN_AREA_OVERHEAD': '50',
    'MIN_AREA_SIDE': '50',
    'MIN_AREA_DIFF': '5',
    'CONNECTIVITY': '8',
    'DIST_FLOOR': '2',
    'BORDER_MARGIN': '5',
    'PALM_RADIUS': '',
    'PALM_RADIUS_CAP': '1.3',
    'PALM_RECT': '120,40',
    'PALM_RECT_ANGLE': '32',
    'FINGER_MIN_AREA': '20',
    'MAX_FINGERS': '5',
    'CANNY_SIGMA': '1',
    'CANNY_LOW': '100',
    'CANNY_HIGH': '200',
    'DEV_THRESH': '3',
    'SLOPE_WINDOW': '7',
    'SLOPE_THRESH': '12',
    'MERGE_RADIUS': '5',
    'END_TRIM': '8',
    'RANGE_TABLE': str(BASE_DIR / 'keyvision' / 'data' / 'code2_ranges.csv'),
    'MODE': 'verbatim',
    'CALIB_MARGIN': '5',
    'BPM': '120',
    'GAP_TOLERANCE': '3',
    'OUT': 'out',
}

PIANOVISION = {
    key: os.environ.get(f'PIANOVISION_{key}', default)
    for key, default in _PIANOVISION_DEFAULTS.items()
}

_PIPELINE_LOGGERS = [
    'keyvision.imagecore',
    'keyvision.binops',
    'keyvision.handmotion',
    'keyvision.keypress',
    'keyvision.calib',
    'keyvision.transcribe',
    'keyvision.synthkb',
    'keyvision.config',
    'keyvision.reports',
    'keyvision.management',
]

# Logging configuration for the pipelines and commands
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
            'datefmt': '%Y-%m-%d %H:%M:%S',
        },
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
            'level': os.environ.get('PIANOVISION_LOG_LEVEL', 'WARNING'),
        },
    },
    'loggers': {
        name: {
            'handlers': ['console'],
            'level': 'DEBUG' if DEBUG else 'INFO',
            'propagate': False,
        }
        for name in _PIPELINE_LOGGERS
    },
}

# File log for local runs; set PIANOVISION_LOG_TO_FILE=0 to disable
if os.environ.get('PIANOVISION_LOG_TO_FILE', '1').lower() not in ('0', 'false', 'no'):
    _logs_dir = BASE_DIR / 'logs'
    _logs_dir.mkdir(exist_ok=True)

    file_handler = {
        'class': 'logging.FileHandler',
        'filename': _logs_dir / 'pianovision.log',
        'formatter': 'verbose',
        'level': 'INFO',
    }
    LOGGING['handlers']['file'] = file_handler

    for logger_name in _PIPELINE_LOGGERS:
        LOGGING['loggers'][logger_name]['handlers'].append('file')
