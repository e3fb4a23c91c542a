import math
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value not in (None, '') else default


class Config:
    """Base configuration class."""
    # Worker pool size for estimator chunks, candidate votes and sweep cells
    THREADS = _env_int('SPECMIX_THREADS', os.cpu_count() or 1)

    # Budgets
    BUDGET_CAP = _env_int('SPECMIX_BUDGET_CAP', 10**9)
    CANDIDATE_CAP = _env_int('SPECMIX_CANDIDATE_CAP', 10**6)
    CHUNK_SIZE = _env_int('SPECMIX_CHUNK_SIZE', 65536)

    # Reproducibility
    SEED = _env_int('SPECMIX_SEED', 0)
    PROFILE = os.environ.get('SPECMIX_PROFILE') or 'practical'

    # Logging
    LOG_FILE = os.environ.get('SPECMIX_LOG_FILE') or None

    # Verification suite sizes
    VERIFY_FIXTURES = _env_int('SPECMIX_VERIFY_FIXTURES', 1000)


class DevelopmentConfig(Config):
    """Development configuration."""
    DEBUG = True
    LOG_LEVEL = 'DEBUG'


class QAConfig(Config):
    """QA/Testing configuration."""
    DEBUG = False
    TESTING = True
    LOG_LEVEL = 'INFO'


class ProductionConfig(Config):
    """Production configuration."""
    DEBUG = False
    LOG_LEVEL = 'WARNING'


# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'qa': QAConfig,
    'production': ProductionConfig,
    'default': QAConfig
}


class PaperConstants:
    """Constants exactly as they appear in the separation-threshold analysis."""
    c_sigma = 512.0
    c_m = 5120.0
    c_trunc = 5.0
    c_gamma = 64.0
    c_n = 2.0 * math.log(12.0)  # Hoeffding at failure 1/6 for each of Re, Im
    c_vote = 5.0
    c_sep = 100.0
    c_dim = 32.0
    c_general_trunc = 10.0
    c_general_gamma = 32.0
    c_general_sep = 32.0


class PracticalConstants:
    """Small constants that keep Monte Carlo runs tractable."""
    c_sigma = 8.0
    c_m = 16.0
    c_trunc = 3.0
    c_gamma = 16.0
    c_n = 16.0
    c_vote = 5.0
    c_sep = 4.0
    c_dim = 4.0
    c_general_trunc = 6.0
    c_general_gamma = 8.0
    c_general_sep = 4.0


constant_profiles = {
    'paper': PaperConstants,
    'practical': PracticalConstants,
}

CONSTANT_NAMES = tuple(name for name in vars(PaperConstants) if name.startswith('c_'))


def get_config(config_name=None):
    """Return the configuration class selected by SPECMIX_ENV."""
    if config_name is None:
        config_name = os.getenv('SPECMIX_ENV', 'default')
    return config.get(config_name, config['default'])


def load_constants(profile='practical', overrides=None):
    """Resolve a constants profile into a plain dict, applying per-run overrides.

    Args:
        profile (str): 'paper' or 'practical'
        overrides (dict): optional subset of constant names to replace

    Returns:
        dict: constant name -> float
    """
    if profile not in constant_profiles:
        raise ValueError(f"Unknown constants profile '{profile}'")
    base = constant_profiles[profile]
    constants = {name: float(getattr(base, name)) for name in CONSTANT_NAMES}
    for name, value in (overrides or {}).items():
        if name not in constants:
            raise ValueError(f"Unknown constant '{name}'")
        constants[name] = float(value)
    return constants
