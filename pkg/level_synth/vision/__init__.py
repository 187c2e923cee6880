"""Raster frame ingestion by sprite template matching."""
