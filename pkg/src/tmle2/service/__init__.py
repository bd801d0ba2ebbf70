"""HTTP service exposing estimation and simulation endpoints."""

from .app import app, create_app

__all__ = ["app", "create_app"]
