from django.apps import AppConfig


class KcscConfig(AppConfig):
    name = 'kcsc'
    verbose_name = 'Kruskal convolutional sparse coding'
