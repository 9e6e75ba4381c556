"""Configuration, persistence, ensemble orchestration and the command line."""
from .main import main  # noqa: F401
