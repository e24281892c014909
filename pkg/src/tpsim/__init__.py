"""Trace-driven temporal prefetching simulator with profile-guided hints."""

__version__ = "0.1.0"
