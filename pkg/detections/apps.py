from django.apps import AppConfig


class DetectionsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'detections'
    verbose_name = 'detection manifests'
