"""Configuration fuzzer: enumerate config changes, push them through a
communicator to a live target, run tests after every change, and record
change/result pairs for export."""

__version__ = "0.1.0"
