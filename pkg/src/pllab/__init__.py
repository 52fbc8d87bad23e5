"""Partial-label learning lab."""
