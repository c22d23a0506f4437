import json
import logging
import logging.config
from pathlib import Path
from typing import Optional

from src.config.settings import Settings, settings as default_settings

logger = logging.getLogger(__name__)


def configure_logging(settings: Optional[Settings] = None, level: Optional[str] = None) -> None:
    """Load the dictConfig file named in settings, falling back to basicConfig."""
    settings = settings or default_settings
    path = Path(settings.log_config_path)
    try:
        with path.open(encoding='utf-8') as fh:
            config = json.load(fh)
        logging.config.dictConfig(config)
    except FileNotFoundError:
        logging.basicConfig(
            level=settings.log_level,
            format="[%(levelname)s] %(asctime)s - %(name)s - %(message)s",
        )
        logger.warning(f"Logging config not found at {path}, using basicConfig")
    except (json.JSONDecodeError, ValueError) as e:
        logging.basicConfig(level=settings.log_level)
        logger.error(f"Invalid logging config {path}: {e}")

    effective = level or settings.log_level
    logging.getLogger("src").setLevel(effective.upper())
