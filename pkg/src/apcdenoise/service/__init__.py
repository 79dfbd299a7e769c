"""HTTP service around the denoising pipeline."""

from .app import app, create_app

__all__ = ["app", "create_app"]
