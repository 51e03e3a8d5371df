"""Test suite for the two-way relay simulator."""
