"""Test suite for face-rfcn."""
