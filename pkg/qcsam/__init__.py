"""
Statevector simulation of quantum complex-valued self-attention classifiers.
"""

from .errors import QcsamError
from .model import QcsamModel

__all__ = ["QcsamError", "QcsamModel"]
