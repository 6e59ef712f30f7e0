"""
Database package for the scheduling simulator.
Handles instance, run and experiment-table storage.
"""

from .result_store import ADVERSARY_COLUMNS, RESULT_COLUMNS, ResultStore

__version__ = "1.0.0"
__all__ = ['ResultStore', 'RESULT_COLUMNS', 'ADVERSARY_COLUMNS']
