"""guardmc: model checking and cutoff machinery for guarded protocols (A,B)^(1,n)."""

__version__ = "0.1.0"
