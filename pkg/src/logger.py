import sys

from loguru import logger

from .config import settings

logger.remove()
logger.add(
    sys.stderr,
    level=settings.LOG_LEVEL,
    format="<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {name}:{line} | {message} {extra}",
)

__all__ = ["logger"]
