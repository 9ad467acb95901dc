"""HTTP and WebSocket access to the engine."""

from .app import create_app

__all__ = ["create_app"]
