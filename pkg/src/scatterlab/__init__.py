"""Digital twin of a self-referenced scattering-optics bench and three protocols run on it."""

__version__ = "0.1.0"
