from django.apps import AppConfig


class ModelIrConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'model_ir'
    verbose_name = 'Model IR'
