"""Configuration module."""
from .logging import configure_logging
from .settings import settings

__all__ = ["settings", "configure_logging"]
