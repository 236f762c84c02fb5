"""Helpers for the test suite and for checking the library by hand."""
