"""Set-based passive and active fault diagnosis for discrete LTI systems.

Zonotopic set-valued observers, residual consistency tests, and per-step
optimal gain / joint gain-and-input design solved as quadratic fractional
programs.
"""

from .backend import BACKEND_NAME, HAVE_COMPILED
from .setops import IntervalMatrix, Zonotope

__all__ = ["BACKEND_NAME", "HAVE_COMPILED", "IntervalMatrix", "Zonotope"]
__version__ = "0.1.0"
