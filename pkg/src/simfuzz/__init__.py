"""Coverage-guided mutational fuzzing for cycle-stepped hardware models."""

__version__ = "0.1.0"
