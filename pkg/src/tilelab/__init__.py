"""Time-frequency tile machinery for the lacunary Carleson operator."""

__version__ = "0.1.0"
