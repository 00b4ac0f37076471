import os
from dotenv import load_dotenv

basedir = os.path.abspath(os.path.dirname(__file__))
load_dotenv(os.path.join(basedir, '.env'))


def _env_float(name, default):
    return float(os.environ.get(name, default))


def _env_int(name, default):
    return int(os.environ.get(name, default))


class Config:
    """Base configuration"""
    # Mesh generation
    SEED = _env_int('ISOPAR_SEED', 42)
    RHO_MAX = _env_float('ISOPAR_RHO_MAX', 8.0)
    SMOOTHING_SWEEPS = _env_int('ISOPAR_SMOOTHING_SWEEPS', 10)
    MESH_ROUNDS = _env_int('ISOPAR_MESH_ROUNDS', 2)
    MESH_REPAIRS = _env_int('ISOPAR_MESH_REPAIRS', 12)

    # Geometry map inversion
    NEWTON_TOL = _env_float('ISOPAR_NEWTON_TOL', 1e-12)
    NEWTON_MAX_ITER = _env_int('ISOPAR_NEWTON_MAX_ITER', 50)

    # Linear solvers
    CG_RTOL = _env_float('ISOPAR_CG_RTOL', 1e-12)
    DENSE_FALLBACK_DOFS = _env_int('ISOPAR_DENSE_FALLBACK_DOFS', 2000)

    # Flow map
    FLOW_DELTA = _env_float('ISOPAR_FLOW_DELTA', 0.05)
    FLOW_STEPS = _env_int('ISOPAR_FLOW_STEPS', 64)
    FLOW_COLLAR = _env_float('ISOPAR_FLOW_COLLAR', 0.2)   # fraction of inradius
    FLOW_CUTOFF = _env_float('ISOPAR_FLOW_CUTOFF', 0.1)   # fraction of inradius

    # Experiments
    REFERENCE_FACTOR = _env_float('ISOPAR_REFERENCE_FACTOR', 4.0)
    OUTPUT_DIR = os.path.join(basedir, os.environ.get('ISOPAR_OUTPUT_DIR', 'results'))
    DEFAULT_HS = (0.2, 0.1, 0.05, 0.025)
    SCHEMA_VERSION = 1

    # Redis and Celery
    REDIS_URL = os.environ.get('REDIS_URL', 'redis://localhost:6379/0')
    CELERY_BROKER_URL = REDIS_URL
    CELERY_RESULT_BACKEND = REDIS_URL
    CELERY_ENABLED = os.environ.get('ISOPAR_CELERY_ENABLED', 'false').lower() == 'true'
    CELERY_ALWAYS_EAGER = False


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True


class TestingConfig(Config):
    """Testing configuration"""
    DEBUG = True
    CELERY_ENABLED = False
    CELERY_ALWAYS_EAGER = True


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False


config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': DevelopmentConfig
}


def get_config(name=None):
    """Return the configuration class selected by name or ISOPAR_ENV."""
    return config[name or os.environ.get('ISOPAR_ENV', 'default')]
