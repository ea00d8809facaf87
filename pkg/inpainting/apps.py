from django.apps import AppConfig


class InpaintingConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'inpainting'
