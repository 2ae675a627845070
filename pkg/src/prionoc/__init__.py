"""Analytical latency models for priority-arbitrated networks-on-chip."""

__version__ = "0.1.0"
