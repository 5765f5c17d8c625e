"""Tests for the brmdp package."""
