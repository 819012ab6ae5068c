"""Block-wise constraint based tiling generation."""

__version__ = "0.1.0"
