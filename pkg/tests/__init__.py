"""Tests for nettmle."""
