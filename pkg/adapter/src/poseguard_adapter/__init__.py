"""Video-to-keypoint-stream adapter for the poseguard engine."""

from .config import AdapterConfig
from .errors import AdapterError
from .extract import extract, extract_records

__version__ = "0.1.0"
