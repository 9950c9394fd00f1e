"""Context-aware security policies compiled for programmable switches, plus a
discrete-event simulator of the in-network enforcement primitive."""

__version__ = "0.1.0"
