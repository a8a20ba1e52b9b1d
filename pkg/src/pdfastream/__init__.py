"""Streaming PDFA learning with red-blue merging and sketch consistency checks."""

__version__ = "0.1.0"

from ._kernel import BACKEND as KERNEL_BACKEND  # noqa: F401
