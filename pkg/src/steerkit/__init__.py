"""Qutrit-pair steering detection with verifiable SDP certificates, datasets and classifiers."""
__version__ = "0.1.0"
