"""
Condensate Lab - Electron-pair condensation on a quantum wire with surface defects
"""

from .config import TOOL_VERSION

__version__ = TOOL_VERSION
