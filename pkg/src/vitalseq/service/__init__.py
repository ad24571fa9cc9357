"""HTTP service exposing the experiment commands."""

from .app import create_app

__all__ = ["create_app"]
