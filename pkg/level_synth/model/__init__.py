"""Probabilistic shape model of level sections."""
