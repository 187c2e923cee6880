"""Sprite, frame, trace and section types."""
