"""Unit tests - no external dependencies required."""
