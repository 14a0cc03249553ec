"""Packet-level multipath TCP simulator over dual LTE-like last miles."""

__version__ = "0.1.0"
