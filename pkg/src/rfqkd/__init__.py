"""Reference-frame-free QKD: correlators, CHSH scans and secret-key-rate bounds."""

__version__ = "0.1.0"
