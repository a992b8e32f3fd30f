# src/data_pipeline/__init__.py
"""Tokenization, record schemas, file I/O and batch sampling."""
