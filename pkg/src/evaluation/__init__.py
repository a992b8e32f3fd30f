# src/evaluation/__init__.py
