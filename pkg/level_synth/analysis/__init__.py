"""Trace segmentation and clustering."""
