import os
from celery import Celery

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
app = Celery("ronin")
app.config_from_object("django.conf:settings", namespace="CELERY")
# per-image scoring tasks live in pipeline.tasks
app.autodiscover_tasks()
