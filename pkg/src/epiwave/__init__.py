"""Multiwave epidemic forecasting on web search and mobility graphs."""

__version__ = "0.1.0"
