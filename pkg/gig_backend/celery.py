"""
Celery app for `explain --celery`: workers pull row chunks and return
serialized attributions.

    celery -A gig_backend worker -l info
"""
import os
from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'gig_backend.settings')

app = Celery('gig_backend')

# CELERY_* keys in settings.py
app.config_from_object('django.conf:settings', namespace='CELERY')

# chunks are long and uneven: one at a time per worker process, acked once done
app.conf.worker_prefetch_multiplier = 1
app.conf.task_acks_late = True

app.autodiscover_tasks()
