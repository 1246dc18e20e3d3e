"""Function-space workbench for half-wave multiplier pipelines and variation norms."""

__version__ = "0.1.0"
