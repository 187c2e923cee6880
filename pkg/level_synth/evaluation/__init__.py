"""Playability and style metrics."""
