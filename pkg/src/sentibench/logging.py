
import logging
import os
from rich.console import Console
from rich.logging import RichHandler


def setup_logging(level: str | None = None) -> logging.Logger:
    level = (level or os.environ.get("SENTIBENCH_LOG_LEVEL") or "INFO").upper()
    handler = RichHandler(console=Console(stderr=True), rich_tracebacks=True, show_path=False)
    logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]", handlers=[handler], force=True)
    return logging.getLogger("sentibench")
