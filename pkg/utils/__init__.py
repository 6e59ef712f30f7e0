"""
Utils package for the rejection scheduling simulator.
Contains errors, step functions, helpers and structured logging.
"""

__version__ = "1.0.0"
