"""Lowering detection for sport climbing from duty-cycled quickdraw accelerometers."""

__version__ = "0.1.0"
