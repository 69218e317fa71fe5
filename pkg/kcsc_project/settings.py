from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'kcsc-local')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'kcsc',
]

MIDDLEWARE = []


# Run ledger (every management command records a RunManifest row here)
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('KCSC_LEDGER_DB', BASE_DIR / 'kcsc_runs.sqlite3'),
    }
}


LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


def _env_float(name, default):
    return float(os.getenv(name, default))


def _env_int(name, default):
    return int(os.getenv(name, default))


# Numerical defaults. Command flags and --config files override these.
KCSC = {
    # Z-step (TC-FISTA)
    'RANK': _env_int('KCSC_RANK', 2),
    'ALPHA': _env_float('KCSC_ALPHA', 1e-3),
    'BETA': _env_float('KCSC_BETA', 1e-4),
    'INNER_MAX_ITERS': _env_int('KCSC_INNER_MAX_ITERS', 200),
    'INNER_TOL': _env_float('KCSC_INNER_TOL', 1e-5),
    # D-step (ADMM)
    'RHO': _env_float('KCSC_RHO', 1.0),
    'DSTEP_MAX_ITERS': _env_int('KCSC_DSTEP_MAX_ITERS', 100),
    'DSTEP_TOL': _env_float('KCSC_DSTEP_TOL', 1e-6),
    # Outer loop
    'OUTER_MAX_SWEEPS': _env_int('KCSC_OUTER_MAX_SWEEPS', 50),
    'OUTER_TOL': _env_float('KCSC_OUTER_TOL', 1e-4),
    'RESTARTS': _env_int('KCSC_RESTARTS', 5),
    'SEED': _env_int('KCSC_SEED', 0),
    'EFFECTIVE_RANK_TOL': _env_float('KCSC_EFFECTIVE_RANK_TOL', 1e-3),
    # Baselines
    'BASELINE_MAX_ITERS': _env_int('KCSC_BASELINE_MAX_ITERS', 500),
    'BASELINE_TOL': _env_float('KCSC_BASELINE_TOL', 1e-6),
    # STFT ingestion
    'STFT_WINDOW': _env_int('KCSC_STFT_WINDOW', 1024),
    'STFT_OVERLAP': _env_float('KCSC_STFT_OVERLAP', 0.5),
    'BAND_LOW': _env_float('KCSC_BAND_LOW', 1.0),
    'BAND_HIGH': _env_float('KCSC_BAND_HIGH', 20.0),
    'CROP_LOW': _env_float('KCSC_CROP_LOW', 0.0),
    'CROP_HIGH': _env_float('KCSC_CROP_HIGH', 20.0),
    'THREADS': _env_int('KCSC_THREADS', 1),
}


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'kcsc': {
            'handlers': ['console'],
            'level': os.getenv('KCSC_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
