# src/model/__init__.py
"""Encoder, masked-language-modeling and embedding heads, contrastive losses."""
