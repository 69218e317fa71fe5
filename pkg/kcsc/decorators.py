"""
Decorators for management commands.

- @command_errors: map toolkit errors onto Django's CommandError so that the
  process exits with the documented code (2 usage, 3 I/O, 4 divergence).
"""

import logging
from functools import wraps

from django.core.management.base import CommandError

from .exceptions import KcscError

logger = logging.getLogger(__name__)


def command_errors(handle):
    """
    Wrap a command's handle() method.

    Usage:
        class Command(BaseCommand):
            @command_errors
            def handle(self, *args, **options):
                ...
    """
    @wraps(handle)
    def wrapper(self, *args, **options):
        try:
            return handle(self, *args, **options)
        except KcscError as exc:
            logger.error(f"{type(exc).__name__}: {exc.message}", exc_info=options.get('verbosity', 1) > 1)
            raise CommandError(exc.message, returncode=exc.exit_code) from exc
        except OSError as exc:
            logger.error(f"I/O failure: {exc}", exc_info=True)
            raise CommandError(f"I/O error: {exc}", returncode=3) from exc

    return wrapper
