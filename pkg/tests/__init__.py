"""Tests for the sled-qubit package."""
