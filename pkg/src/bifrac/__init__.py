"""Bifractional displacement operators and the phase-space functions built on them."""
__version__ = "0.1.0"
