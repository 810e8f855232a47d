from django.apps import AppConfig


class KeyvisionConfig(AppConfig):
    name = 'keyvision'
    verbose_name = 'PianoVision finger and key analysis'
