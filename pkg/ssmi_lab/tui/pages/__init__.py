"""TUI pages package."""

from .main_page import MainPage

__all__ = ["MainPage"]
