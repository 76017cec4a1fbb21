"""Tests for signal analysis."""
