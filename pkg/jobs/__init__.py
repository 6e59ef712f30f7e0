"""
Jobs package for the rejection scheduling simulator.
Contains the experiment runner and the command handlers behind main.py.
"""

__version__ = "1.0.0"
