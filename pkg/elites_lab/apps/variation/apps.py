from django.apps import AppConfig


class VariationConfig(AppConfig):
    name = "apps.variation"
