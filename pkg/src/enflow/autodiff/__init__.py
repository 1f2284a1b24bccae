"""Minimal reverse-mode automatic differentiation over float64 numpy arrays"""

__all__ = ["Tape", "Tensor", "active_tape", "grad", "ops"]

from . import ops
from .tape import Tape, Tensor, active_tape, grad
