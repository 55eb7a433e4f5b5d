"""Context-gated dual-process model of false-belief reasoning."""

__version__ = "0.1.0"
