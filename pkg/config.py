# Configuration settings
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_flag(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


class Config:
    """Base configuration."""
    DEBUG = False
    TESTING = False
    ENV = os.getenv('INPAINT_ENV', 'development')
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    DEVICE = os.getenv('INPAINT_DEVICE', 'cpu')
    NUM_WORKERS = int(os.getenv('INPAINT_NUM_WORKERS', '1'))
    INCEPTION_WEIGHTS = os.getenv('INPAINT_INCEPTION_WEIGHTS')
    DETERMINISTIC = _env_flag('INPAINT_DETERMINISTIC', 'true')
    CONFIG_FILE_NAME = 'config.json'
    MANIFEST_FILE_NAME = 'manifest.json'


class DevelopmentConfig(Config):
    """Development configuration."""
    DEBUG = True
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'DEBUG')


class ProductionConfig(Config):
    """Production configuration."""
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'WARNING')


class TestingConfig(Config):
    """Testing configuration."""
    TESTING = True
    LOG_LEVEL = 'DEBUG'
    DEVICE = 'cpu'


# Set configuration based on environment
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}

# Active configuration
active_config = config[os.getenv('INPAINT_ENV', 'default')]()
