"""Convert video files into the storyline pipeline's canonical per-frame
feature matrices."""

__version__ = "0.1.0"


class ExtractionError(ValueError):
    """Unusable input or a configuration that cannot produce valid output."""
