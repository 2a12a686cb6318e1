"""Extraction, amplification and analysis of faint wall-reflection residuals in video."""
__version__ = "0.1.0"
