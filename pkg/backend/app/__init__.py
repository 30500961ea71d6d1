"""Signal proportion estimation under arbitrary dependence."""

__version__ = "1.0.0"
