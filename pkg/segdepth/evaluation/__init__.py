"""Depth, boundary, segmentation and retrieval metrics."""
