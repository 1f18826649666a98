import logging
import sys

import structlog
import typer

from phturnpike.cli.routes import register_commands
from phturnpike.core.config import settings

logging.basicConfig(format="%(message)s", stream=sys.stderr, level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))

# Configure structured logging
structlog.configure(
    processors=[
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
        structlog.dev.ConsoleRenderer() if settings.LOG_FORMAT == "console" else structlog.processors.JSONRenderer(),
    ],
    context_class=dict,
    logger_factory=structlog.stdlib.LoggerFactory(),
    wrapper_class=structlog.stdlib.BoundLogger,
    cache_logger_on_first_use=True,
)

logger = structlog.get_logger()

app = typer.Typer(
    name=settings.PROJECT_NAME,
    help="Turnpike analysis for port-Hamiltonian optimal control problems",
    no_args_is_help=True,
    add_completion=False,
)

register_commands(app)


@app.callback()
def root() -> None:
    """ph-turnpike command line"""


def main() -> None:
    logger.debug("cli starting", project=settings.PROJECT_NAME, version=settings.VERSION)
    app()


if __name__ == "__main__":
    main()
