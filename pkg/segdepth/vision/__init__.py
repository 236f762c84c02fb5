"""Superpixels, partitions, resampling and raster files."""
