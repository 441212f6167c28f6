# Main application entry point
import logging
import sys

from config import active_config
from controllers.cli_controller import cli, dispatch

logger = logging.getLogger(__name__)


def configure_logging(level: str = None) -> None:
    """Configure root logging once for the process."""
    logging.basicConfig(
        level=getattr(logging, (level or active_config.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def create_app(config=None):
    """Configure logging and return the command group."""
    config = config or active_config
    configure_logging(config.LOG_LEVEL)
    logger.debug(f"Application created with configuration: {config.ENV} (device {config.DEVICE})")
    return cli


def main() -> None:
    create_app()
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == '__main__':
    main()
