"""Utility modules for the fair graph data preparation package."""
