"""Synthetic corpora with ground truth."""
