"""Tests for dimhunk modules."""
