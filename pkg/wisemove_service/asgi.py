"""
ASGI entry point for the wisemove service.

Exposes the ASGI callable as the module-level variable ``application``.
"""

import os

from django.core.asgi import get_asgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "wisemove_service.settings")

application = get_asgi_application()
