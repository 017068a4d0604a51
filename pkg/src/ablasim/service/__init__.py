"""HTTP service wrapper: typed request/response models and the app factory."""

from .app import app, create_app

__all__ = ["app", "create_app"]
