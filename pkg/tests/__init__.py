"""
Test suite for the QCSAM library and experiment CLI.
"""
