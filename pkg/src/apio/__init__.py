"""Automatic prompt induction and beam-search optimization for text
revision tasks, with offline-testable scoring and backends."""

__version__ = "0.1.0"
