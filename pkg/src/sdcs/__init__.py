"""Sample-distortion analysis and bandwise sampling for compressed imaging."""

__version__ = "0.1.0"
