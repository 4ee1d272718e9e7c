"""Anticipatory detection of body-focused repetitive behaviors from wearables."""

__version__ = "0.1.0"
