"""RF modulation synthesis, compact CNN training, and transfer scoring."""

__version__ = "0.1.0"
