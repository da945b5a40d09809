from django.apps import AppConfig


class WisemoveConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "wisemove"
    verbose_name = "Verified options planning"
