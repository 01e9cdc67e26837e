"""
Potok eksperymentów akceptowalności relacji taksonomicznych.
"""

__version__ = "0.1.0"
