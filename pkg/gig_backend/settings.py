"""
Django settings for gig_backend project.

Generalized Integrated Gradients attribution toolkit (command-line only)
"""

from pathlib import Path
from decouple import config as decouple_config, Config, RepositoryEnv
import sys
import logging

# -------------------------
# ENV LOADING (local.env)
# -------------------------
env_file = Path(__file__).resolve().parent.parent / "local.env"
if env_file.exists():
    config = Config(RepositoryEnv(str(env_file)))
else:
    config = decouple_config  # fall back to system env

# -------------------------
# BASE
# -------------------------
BASE_DIR = Path(__file__).resolve().parent.parent

# No web surface is served; Django still needs a key to boot.
SECRET_KEY = config("SECRET_KEY", default="gig-local-cli-only")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = []

# -------------------------
# APPLICATION DEFINITION
# -------------------------
INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",

    # Third party apps
    "rest_framework",

    # Local apps
    "model_ir",
    "attribution",
    "calibration",
    "training",
    "reports",
]

MIDDLEWARE = []

# -------------------------
# DATABASE
# -------------------------
# Nothing is persisted; SQLite only satisfies Django's checks.
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

USE_TZ = True
TIME_ZONE = "UTC"

# -------------------------
# ATTRIBUTION ENGINE
# -------------------------
GIG_K_MAX = config("GIG_K_MAX", default=20, cast=int)
GIG_EFFICIENCY_TOL = config("GIG_EFFICIENCY_TOL", default=1e-5, cast=float)

GIG_QUAD_NODES = config("GIG_QUAD_NODES", default=16, cast=int)
GIG_QUAD_PANELS = config("GIG_QUAD_PANELS", default=8, cast=int)
GIG_QUAD_TOL = config("GIG_QUAD_TOL", default=1e-8, cast=float)
GIG_QUAD_MAX_DEPTH = config("GIG_QUAD_MAX_DEPTH", default=24, cast=int)

# Row-level parallelism for `explain` when --jobs is not given
GIG_JOBS = config("GIG_JOBS", default=1, cast=int)

# -------------------------
# CELERY (batch explanation workers)
# -------------------------
CELERY_BROKER_URL = config("CELERY_BROKER_URL", default="redis://localhost:6379/0")
CELERY_RESULT_BACKEND = config("CELERY_RESULT_BACKEND", default="redis://localhost:6379/0")
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_TASK_ALWAYS_EAGER = config("CELERY_TASK_ALWAYS_EAGER", default=False, cast=bool)
CELERY_TIMEZONE = TIME_ZONE

# -------------------------
# LOGGING (GIG_LOG controls verbosity)
# -------------------------
GIG_LOG = config("GIG_LOG", default="INFO").upper()
GIG_LOG_FILE = config("GIG_LOG_FILE", default=True, cast=bool)

LOG_DIR = BASE_DIR / "logs"
if GIG_LOG_FILE:
    LOG_DIR.mkdir(exist_ok=True)


class UTF8StreamHandler(logging.StreamHandler):
    """StreamHandler with UTF-8 encoding support; defaults to stderr so stdout stays clean for payloads"""
    def __init__(self, stream=None):
        if stream is None:
            stream = sys.stderr
        super().__init__(stream)

    def emit(self, record):
        try:
            msg = self.format(record)
            stream = self.stream
            if hasattr(stream, "buffer"):
                stream.buffer.write(msg.encode("utf-8", errors="replace"))
                stream.buffer.write(self.terminator.encode("utf-8"))
            else:
                stream.write(msg)
                stream.write(self.terminator)
            self.flush()
        except Exception:
            self.handleError(record)


_LOG_HANDLERS = ["console", "file"] if GIG_LOG_FILE else ["console"]

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {"format": "[{levelname}] {asctime} {module} {message}", "style": "{"},
        "simple": {"format": "{levelname} {message}", "style": "{"},
    },
    "handlers": {
        "console": {
            "level": "DEBUG",
            "()": UTF8StreamHandler,
            "formatter": "verbose",
        },
        **({
            "file": {
                "level": "INFO",
                "class": "logging.FileHandler",
                "filename": str(LOG_DIR / "gig.log"),
                "formatter": "verbose",
                "encoding": "utf-8",
            },
        } if GIG_LOG_FILE else {}),
    },
    "root": {"handlers": _LOG_HANDLERS, "level": GIG_LOG},
    "loggers": {
        "django": {"handlers": _LOG_HANDLERS, "level": "WARNING", "propagate": False},
        "model_ir": {"handlers": _LOG_HANDLERS, "level": GIG_LOG, "propagate": False},
        "attribution": {"handlers": _LOG_HANDLERS, "level": GIG_LOG, "propagate": False},
        "calibration": {"handlers": _LOG_HANDLERS, "level": GIG_LOG, "propagate": False},
        "training": {"handlers": _LOG_HANDLERS, "level": GIG_LOG, "propagate": False},
        "reports": {"handlers": _LOG_HANDLERS, "level": GIG_LOG, "propagate": False},
    },
}
