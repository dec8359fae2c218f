from django.apps import AppConfig


class MapelitesConfig(AppConfig):
    name = "apps.mapelites"
