"""HTTP layer for the annotation review service."""

from .app import create_app

__all__ = ["create_app"]
