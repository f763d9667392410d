__version__ = "0.1.0"

from .primitives import pipeline_runner
