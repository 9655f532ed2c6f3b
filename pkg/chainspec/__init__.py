"""chainspec: chain structure and emergent order spectra of discrete dynamical systems."""

__version__ = "0.1.0"
