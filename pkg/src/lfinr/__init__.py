"""Light-field compression with an SAI-wise implicit neural representation."""
__version__ = "0.1.0"
