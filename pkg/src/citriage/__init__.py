"""Failure triage for hierarchical CI/CD pipelines."""

__version__ = "0.1.0"
