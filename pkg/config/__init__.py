"""Configuration for the graph-relational domain adaptation toolkit."""
from config.settings import Settings, get_settings, reload_settings

__all__ = ["Settings", "get_settings", "reload_settings"]
