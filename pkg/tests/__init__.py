"""
Tests for dynoframe
"""
