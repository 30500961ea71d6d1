"""Utility functions for the app."""

from app.utils.logger import logger

__all__ = ["logger"] 