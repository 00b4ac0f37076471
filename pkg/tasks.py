from celery import Celery
from celery.utils.log import get_task_logger

from config import get_config

settings = get_config()

# Initialize Celery
celery = Celery('isopar')

# Configure Celery to use Redis
celery.conf.update(
    broker_url=settings.CELERY_BROKER_URL,
    result_backend=settings.CELERY_RESULT_BACKEND,
    task_serializer='json',
    accept_content=['json'],
    result_serializer='json',
    timezone='UTC',
    enable_utc=True,
    task_always_eager=settings.CELERY_ALWAYS_EAGER,
)

logger = get_task_logger(__name__)


@celery.task(name='isopar.compute_row')
def compute_row(experiment, config, value):
    """Compute one sweep row (h or t) of an experiment on a worker."""
    from experiments import ExperimentConfig, safe_row

    cfg = ExperimentConfig.from_dict(dict(config, experiment=experiment))
    logger.info('Computing %s row %s on %s (P%d)', experiment, value, cfg.domain, cfg.degree)
    row = safe_row(cfg, value)
    if row.get('error'):
        logger.warning('%s row %s failed: %s', experiment, value, row['error'])
    return row
