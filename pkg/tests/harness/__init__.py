"""Tests for the command-line harness."""
