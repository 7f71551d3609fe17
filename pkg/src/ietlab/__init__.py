"""Renormalization tools for interval exchange transformations."""
