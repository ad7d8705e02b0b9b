"""Classical wave-optics reenactment of polarization eraser and wire-grid imaging experiments."""

__version__ = "0.1.0"
