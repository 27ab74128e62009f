"""HTTP layer exposing runs and worker sessions."""

from .app import create_app

__all__ = ["create_app"]
