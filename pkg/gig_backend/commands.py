"""
Shared base for the attribution management commands.

Maps domain exceptions onto the exit-code contract:
    0  success
    1  tolerance violation or failed row
    2  IO / schema / arity error
    3  capacity (radix) error
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict

from django.core.management.base import BaseCommand, CommandError

from attribution.exceptions import AttributionError, RadixOverflow
from calibration.ecdf import DegenerateScores
from model_ir.exceptions import GraphError
from training.gbm import DegenerateData

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_IO = 2
EXIT_CAPACITY = 3

EXIT_CODE_HELP = (
    "Exit codes: 0 success, 1 tolerance violation or failed row, "
    "2 IO/schema/arity error, 3 capacity (radix) error."
)


def exit_code_for(exc: BaseException) -> int:
    """Exit code a failure maps to under the command contract"""
    if isinstance(exc, RadixOverflow):
        return EXIT_CAPACITY
    if isinstance(exc, (OSError, GraphError, DegenerateScores, DegenerateData, json.JSONDecodeError, KeyError)):
        return EXIT_IO
    if isinstance(exc, AttributionError):
        return EXIT_TOLERANCE
    return EXIT_IO


class GigCommand(BaseCommand):
    """BaseCommand whose subclasses implement `run()` and let domain errors become exit codes"""

    epilog = EXIT_CODE_HELP

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.epilog = self.epilog
        return parser

    def handle(self, *args, **options):
        name = self.__class__.__module__.rsplit('.', 1)[-1]
        logger.info(f"▶ {name} started")
        try:
            self.run(*args, **options)
        except CommandError:
            raise
        except FileNotFoundError as e:
            raise CommandError(f"File not found: {e.filename}", returncode=EXIT_IO)
        except Exception as e:
            code = exit_code_for(e)
            logger.error(f"❌ {name} failed ({type(e).__name__}): {e}")
            raise CommandError(f"{type(e).__name__}: {e}", returncode=code)
        logger.info(f"✅ {name} finished")

    def run(self, *args, **options):
        raise NotImplementedError("subclasses of GigCommand must provide a run() method")

    # -------------------------
    # IO helpers
    # -------------------------
    def read_json(self, path: str) -> Any:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)

    def write_json(self, path: str, payload: Dict[str, Any]) -> None:
        out = Path(path)
        if out.parent and not out.parent.exists():
            out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, sort_keys=False)
            f.write('\n')
        logger.info(f"💾 wrote {out}")

    def write_json_stdout(self, payload: Any) -> None:
        self.stdout.write(json.dumps(payload, indent=2))

    def fail(self, message: str, code: int = EXIT_TOLERANCE) -> None:
        raise CommandError(message, returncode=code)
