"""
WSGI entry point for the wisemove service.

Exposes the WSGI callable as the module-level variable ``application``.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "wisemove_service.settings")

application = get_wsgi_application()
