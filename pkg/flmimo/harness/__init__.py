"""Command-line entry points: ``solve``, ``sweep`` and ``oracle``."""
